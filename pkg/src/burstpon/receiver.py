"""The burst-mode receiver chain, wired end to end for one detected burst."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import acquisition as acq
from .channel import WAVELENGTH_NM
from .core import SYMBOL_RATE, DualPolWaveform, ParameterError, derotate, design_rrc
from .equalizer import (
    EqualizerState,
    estimate_channel_mmse,
    estimate_channel_zf,
    init_taps,
    mimo_ddlms,
    pilot_cpr,
)
from .framer import FrameConfig, build_preamble_b, gen_zadoff_chu, known_symbols
from .timing import SyncResult, TimingLoopState, frame_sync, timing_recovery


@dataclass(frozen=True)
class ReceiverConfig:
    threshold_db: float = 6.0
    rolloff: float = 0.1
    rrc_span: int = 32
    cd_ps_nm: float = 0.0
    sop_method: str = "polar"  # polar | gram_schmidt
    wavelength_nm: float = WAVELENGTH_NM
    tr_kp: float = 0.01
    tr_ki: float = 0.0005
    tr_beat: int = 100
    tr_delay_beats: int = 20
    tr_init: bool = True
    init_mode: str = "mmse"  # mmse | zf | zero
    est_method: str = "lstsq"
    est_half_span: int | None = None
    ntaps: int = 15
    step_size: float = 1e-4
    eq_beat: int = 100
    eq_delay_beats: int = 60
    pmnr_floor_db: float = 3.0
    early_bits: int = 20000


@dataclass
class BurstResult:
    acquisition: acq.AcquisitionResult
    timing: TimingLoopState
    timing_phase_segment: float
    segment_start: int
    timing_input: DualPolWaveform
    sync: SyncResult
    noise_var: float
    equalizer: EqualizerState
    initial_taps: NDArray
    preamble_rx: NDArray
    equalized: NDArray | None = None
    payload: NDArray | None = None


def estimate_noise_var(wf: DualPolWaveform, burst_start: int, burst_len: int,
                       noise_span: int, sps: int = 2) -> float:
    """Per-symbol noise variance relative to unit symbol power after matched filtering.

    Uses the guard samples before the burst for noise power and the burst body
    for signal-plus-noise power.
    """
    lo = max(0, burst_start - noise_span)
    hi = max(lo, burst_start - 64)
    if hi - lo < 64:
        return 0.0
    arr = wf.stack()
    p_n = float(np.mean(np.abs(arr[:, lo:hi]) ** 2))
    p_b = float(np.mean(np.abs(arr[:, burst_start + 256 : burst_start + burst_len - 256]) ** 2))
    if p_b <= p_n:
        return float("inf")
    return p_n / (sps * (p_b - p_n))


@dataclass
class Acquisition:
    """Output of the feedforward front end: estimates plus the corrected segment."""

    result: acq.AcquisitionResult
    segment: NDArray  # MF/CDC output, SOP-recovered, fully derotated
    segment_start: int
    timing_phase_segment: float


def acquire_burst(wf: DualPolWaveform, burst_start: int, frame_cfg: FrameConfig,
                  cfg: ReceiverConfig = ReceiverConfig(), symbol_rate: float = SYMBOL_RATE) -> Acquisition:
    """Coarse FOE, SOP recovery, matched filter + CDC, timing phase and fine FOE."""
    fs = wf.sample_rate
    sps = int(round(fs / symbol_rate))
    rrc = design_rrc(cfg.rolloff, cfg.rrc_span, sps)
    flags: list[str] = []

    n_sym = frame_cfg.total_symbols
    s0 = max(0, burst_start - 64)
    s1 = min(len(wf), burst_start + sps * (n_sym + 2 * cfg.tr_beat) + 2 * len(rrc))
    seg = wf.stack()[:, s0:s1]

    win = acq.tone_window(burst_start - s0, rrc, sps, preamble_a=frame_cfg.preamble_a_length)
    raw_win = DualPolWaveform.from_array(seg[:, win], fs)
    coarse, conf = acq.coarse_foe(raw_win, symbol_rate, full_output=True)
    if conf < 6:
        flags.append("coarse_foe_low_confidence")
    seg = derotate(seg, coarse, fs)

    recovery, tone_db = acq.estimate_sop(DualPolWaveform.from_array(seg[:, win], fs), 0.0, symbol_rate,
                                         full_output=True, method=cfg.sop_method)
    if tone_db < 6:
        flags.append("sop_low_confidence")
    seg = recovery.m @ seg

    seg = acq.matched_filter_and_cdc(DualPolWaveform.from_array(seg, fs), rrc, cfg.cd_ps_nm,
                                     cfg.wavelength_nm).stack()
    win_wf = DualPolWaveform.from_array(seg[:, win], fs)
    tau_win = acq.estimate_timing_phase(win_wf, sps)
    # widen by the interpolator margin so all tone-window symbols feed the fine FOE
    pad = sps * 8
    foe_wf = DualPolWaveform.from_array(seg[:, max(0, win.start - pad) : win.stop + pad], fs)
    resid = acq.fine_foe(foe_wf, 0.0, tau_win, symbol_rate)
    seg = derotate(seg, resid, fs)

    result = acq.AcquisitionResult(
        burst_start=burst_start,
        coarse_foe_hz=coarse,
        jones_estimate=recovery,
        timing_phase=tau_win,
        fine_foe_hz=coarse + resid,
        flags=tuple(flags),
    )
    return Acquisition(result, seg, s0, float(acq.wrap_phase(tau_win + win.start / sps)))


def receive_burst(wf: DualPolWaveform, burst_start: int, frame_cfg: FrameConfig,
                  cfg: ReceiverConfig = ReceiverConfig(), noise_var: float | None = None,
                  noise_span: int = 2048, symbol_rate: float = SYMBOL_RATE,
                  equalize: bool = True) -> BurstResult:
    """Run the whole burst-mode chain on one burst starting near ``burst_start``.

    With ``equalize=False`` the chain stops after tap initialization (no
    DD-LMS, CPR or payload).
    """
    fs = wf.sample_rate
    sps = int(round(fs / symbol_rate))
    front = acquire_burst(wf, burst_start, frame_cfg, cfg, symbol_rate)
    timing_input = DualPolWaveform.from_array(front.segment, fs)
    tau_seg = front.timing_phase_segment

    tr_state = TimingLoopState(kp=cfg.tr_kp, ki=cfg.tr_ki, beat_size=cfg.tr_beat,
                               loop_delay_beats=cfg.tr_delay_beats)
    symbols, tr_state = timing_recovery(timing_input, tau_seg if cfg.tr_init else None, tr_state, sps)

    zc = gen_zadoff_chu(frame_cfg.b1_length, frame_cfg.zc_root)
    pattern = build_preamble_b(zc)
    sync = frame_sync(symbols, pattern, cfg.pmnr_floor_db)
    fstart = sync.frame_start
    L3 = pattern.shape[-1]

    n_sym = frame_cfg.total_symbols
    nv = estimate_noise_var(wf, burst_start, sps * n_sym, noise_span, sps) if noise_var is None else noise_var
    rx_pre = symbols[:, fstart : fstart + L3]
    if rx_pre.shape[-1] < L3:
        raise RuntimeError("preamble B truncated at end of record")
    eq_kwargs = dict(step_size=cfg.step_size, beat_size=cfg.eq_beat, loop_delay_beats=cfg.eq_delay_beats)
    if cfg.init_mode == "zero":
        state = init_taps(None, cfg.ntaps, "zero", **eq_kwargs)
    elif cfg.init_mode == "zf":
        est = estimate_channel_zf(rx_pre, zc, cfg.est_method, cfg.est_half_span)
        state = init_taps(est, cfg.ntaps, "zf", **eq_kwargs)
    elif cfg.init_mode == "mmse":
        est = estimate_channel_mmse(rx_pre, zc, nv if np.isfinite(nv) else 0.0, cfg.est_method,
                                    cfg.est_half_span)
        state = init_taps(est, cfg.ntaps, "mmse", **eq_kwargs)
    else:
        raise ParameterError(f"unknown init_mode {cfg.init_mode!r}")
    result = BurstResult(
        acquisition=front.result,
        timing=tr_state,
        timing_phase_segment=tau_seg,
        segment_start=front.segment_start,
        timing_input=timing_input,
        sync=sync,
        noise_var=nv,
        equalizer=state,
        initial_taps=state.w.copy(),
        preamble_rx=rx_pre,
    )
    if not equalize:
        return result

    # frame index 0 (start of preamble A) in the symbol stream
    origin = fstart - frame_cfg.preamble_a_length
    group = frame_cfg.pilot_interval + 1
    body = frame_cfg.n_groups * group + frame_cfg.pad_symbols
    p_start = origin + frame_cfg.preamble_length
    p_stop = min(p_start + body, symbols.shape[-1])
    pilots_rel = group * np.arange(frame_cfg.n_groups)
    pilots_rel = pilots_rel[p_start + pilots_rel < p_stop]
    pilot_vals = np.tile(known_symbols(frame_cfg.n_groups)[: pilots_rel.size], (2, 1))

    y, state = mimo_ddlms(symbols, state, p_start, p_stop, p_start + pilots_rel, pilot_vals)

    offs = np.arange(frame_cfg.n_groups * group).reshape(frame_cfg.n_groups, group)[:, 1:].ravel()
    offs = offs[offs < y.shape[-1]]
    result.equalizer = state
    result.equalized = y
    result.payload = pilot_cpr(y, pilots_rel, pilot_vals, offs)
    return result
