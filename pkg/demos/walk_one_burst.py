"""Follow one upstream burst through the receiver at the operating point.

    python demos/walk_one_burst.py [seed]
"""

import sys

import numpy as np

from burstpon.framer import SHORT_FRAME
from burstpon.harness import TrialConfig, build_capture, burst_receiver_config
from burstpon.receiver import receive_burst
from burstpon.equalizer import demap_and_count

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = TrialConfig(frame=SHORT_FRAME, seed=seed)
tc = build_capture(cfg)
ch = tc.channels[0]
print(f"burst at sample {tc.burst_starts[0]}, detected at {tc.detections}")
print(f"true offset {ch.delta_f / 1e6:.1f} MHz, fractional delay {tc.delays[0]:+.3f} samples, SNR {tc.snr_db} dB")

res = receive_burst(tc.waveform, tc.detections[0], cfg.frame, burst_receiver_config(cfg, ch))
a = res.acquisition
print(f"coarse FOE {a.coarse_foe_hz / 1e6:.2f} MHz, fine FOE {a.fine_foe_hz / 1e6:.2f} MHz")
print(f"SOP residual |(R J)_xy| = {np.abs((a.jones_estimate @ tc.jones[0]).m[0, 1]):.3f}")
print(f"timing phase from preamble A {res.timing_phase_segment:+.3f} symbol")
print(f"frame sync at symbol {res.sync.frame_start}, PMNR {res.sync.pmnr_db:.1f} dB")

c = res.initial_taps.shape[-1] // 2
print("initial centre taps |W|:")
print(np.array2string(np.abs(res.initial_taps[..., c]), precision=3))
mse = np.asarray(res.equalizer.mse_curve)
print(f"equalizer MSE: beat 0 {mse[0]:.4f}, beat 60 {mse[60]:.4f}, last {mse[-1]:.4f}")

rep = demap_and_count(res.payload, tc.frames[0].source_bits)
print(f"BER {rep.ber_total:.3e} ({rep.errors_total}/{rep.bits_total}), first 20000 bits {rep.ber_early:.3e}")
