"""Idle slots and the feasible region for a small three-client system.

Each client needs a geometric number of attempts to get its packet through.
The expected number of slots left over when a subset transmits first bounds
how much delivery ratio that subset can ever get.
"""
import numpy as np

from delayqos import SystemConfig, all_idle_times, idle_time, is_feasible

cfg = SystemConfig.from_arrays(4, [0.9, 0.6, 0.75])

# expected idle slots for every subset, indexed by bitmask
idle = all_idle_times(cfg)
for mask, value in enumerate(idle):
    ids = [i + 1 for i in range(cfg.n) if mask >> i & 1]
    print(f"I{ids} = {value:.4f}")

# the whole population can use at most tau - I slots
print("capacity of everyone:", cfg.tau - idle_time([1, 2, 3], cfg))

# a symmetric guess at the delivery ratios, then a greedier one
for q in (np.array([0.5, 0.5, 0.5]), np.array([0.95, 0.9, 0.95])):
    report = is_feasible(q, cfg)
    print(q, "feasible" if report else "infeasible", f"slack {report.slack:+.4f}")
