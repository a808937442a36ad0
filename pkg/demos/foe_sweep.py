"""Frequency-offset estimation error across the +-1 GHz pull-in range.

    python demos/foe_sweep.py [trials]
"""

import sys
from dataclasses import replace

from burstpon.framer import SHORT_FRAME
from burstpon.harness import TrialConfig, figure_preset

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20
base = TrialConfig(frame=SHORT_FRAME, tr_baseline=False)
rows, _ = figure_preset("fig2d", base, trials)
print(f"{'offset MHz':>10} {'mean |err| MHz':>15} {'max |err| MHz':>14} {'<=10 MHz':>9}")
for r in rows:
    print(f"{r['delta_f_hz'] / 1e6:10.0f} {r['foe_abs_error_mhz_mean']:15.2f} "
          f"{r['foe_abs_error_mhz_max']:14.2f} {r['within_10mhz_fraction']:9.0%}")
