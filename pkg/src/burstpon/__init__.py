"""Burst-mode coherent DSP for 32 GBaud PDM-16QAM TDM-PON upstream.

Modules:

- ``core``: waveforms, RRC design, delays, resampling, interpolation
- ``framer``: 16QAM mapping, tone and CAZAC preambles, pilots, pulse shaping
- ``channel``: SOP, dispersion, carrier offset, phase noise, noise, burst multiplexing
- ``acquisition``: detection, coarse FOE, one-tap SOP recovery, MF+CDC, timing phase, fine FOE
- ``timing``: delayed Godard timing loop and CAZAC frame sync
- ``equalizer``: ZF/MMSE channel estimation, tap init, delayed DD-LMS, pilot CPR, BER
- ``receiver``: the chain wired end to end for one burst
- ``harness``: seeded trials, sweeps, plot data
"""

__version__ = "0.1.0"

from .core import SAMPLE_RATE, SPS, SYMBOL_RATE, DualPolWaveform, FilterTaps, ParameterError, design_rrc
from .framer import SHORT_FRAME, BurstFrame, FrameConfig, assemble_burst, pulse_shape
from .channel import ChannelConfig, JonesMatrix, jones_from_params, multiplex_bursts
from .receiver import BurstResult, ReceiverConfig, acquire_burst, receive_burst
from .equalizer import FEC_LIMIT, demap_and_count
from .harness import (
    OPERATING_SNR_DB,
    ConfigError,
    TrialConfig,
    TrialMetrics,
    emit_outputs,
    run_sweep,
    run_trial,
)

__all__ = [
    "SAMPLE_RATE",
    "SPS",
    "SYMBOL_RATE",
    "DualPolWaveform",
    "FilterTaps",
    "ParameterError",
    "design_rrc",
    "SHORT_FRAME",
    "BurstFrame",
    "FrameConfig",
    "assemble_burst",
    "pulse_shape",
    "ChannelConfig",
    "JonesMatrix",
    "jones_from_params",
    "multiplex_bursts",
    "BurstResult",
    "ReceiverConfig",
    "acquire_burst",
    "receive_burst",
    "FEC_LIMIT",
    "demap_and_count",
    "OPERATING_SNR_DB",
    "ConfigError",
    "TrialConfig",
    "TrialMetrics",
    "emit_outputs",
    "run_sweep",
    "run_trial",
]
