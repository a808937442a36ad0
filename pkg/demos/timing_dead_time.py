"""Timing loop with and without the preamble-A phase estimate.

The loop correction lands 20 beats late, so a loop started 0.2 symbol off
stays there for the whole dead time.

    python demos/timing_dead_time.py [trials]
"""

import sys

import numpy as np

from burstpon.framer import SHORT_FRAME
from burstpon.harness import TrialConfig, timing_error_traces

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 10
cfg = TrialConfig(frame=SHORT_FRAME)
traces = [timing_error_traces(cfg, t) for t in range(trials)]
n = min(t.error_with_init.size for t in traces)
with_init = np.mean([t.error_with_init[:n] for t in traces], axis=0)
without = np.mean([t.error_without_init[:n] for t in traces], axis=0)

print("beat  |err| init  |err| cold")
for b in list(range(0, 30, 5)) + list(range(30, n, 10)):
    print(f"{b:4d}  {with_init[b]:10.4f}  {without[b]:10.4f}")
