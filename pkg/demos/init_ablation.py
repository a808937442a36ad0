"""Why initialize the equalizer: MMSE, ZF and zero initial taps on the same bursts.

With a 60-beat update delay, zero-initialized taps cannot produce anything
useful for the first 6000 symbols, so the early bits are lost.

    python demos/init_ablation.py [trials]
"""

import sys
from dataclasses import replace

import numpy as np

from burstpon.framer import SHORT_FRAME
from burstpon.harness import TrialConfig, run_trials

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20
base = TrialConfig(frame=SHORT_FRAME, tr_baseline=False)

print(f"{'init':>6} {'BER first 20000':>16} {'BER total':>10} {'failed':>7}")
for mode in ("mmse", "zf", "zero"):
    recs = run_trials(replace(base, rx=replace(base.rx, init_mode=mode)), trials)
    ok = [m for m in recs if m.ok]
    early = np.mean([m.ber_first20000 for m in ok]) if ok else float("nan")
    total = np.mean([m.ber_total for m in ok]) if ok else float("nan")
    print(f"{mode:>6} {early:16.3e} {total:10.3e} {len(recs) - len(ok):7d}")
