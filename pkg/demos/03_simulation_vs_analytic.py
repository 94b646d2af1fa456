"""Run the slotted simulator and compare against the analytic limit."""
import numpy as np

from delayqos import (
    PriorityRandom,
    RandomPriority,
    RngSpec,
    SystemConfig,
    WeightedTransmission,
    empirical_vs_analytic,
    run_simulation,
)

cfg = SystemConfig.from_arrays(4, [0.8, 0.7, 0.6, 0.9])
rho = np.array([2.0, 1.0, 1.0, 2.0])

report = empirical_vs_analytic(WeightedTransmission(rho), cfg, 50_000, RngSpec(7))
print("simulated:", np.round(report.empirical_q, 4))
print("analytic: ", np.round(report.analytic_q, 4))
print(f"largest gap {report.max_gap:.4f}")

# the uniform and fixed-key baselines for comparison
for policy in (RandomPriority(), PriorityRandom(rho)):
    stats = run_simulation(policy, cfg, 50_000, RngSpec(7))
    print(type(policy).__name__, np.round(stats.empirical_q, 4))
