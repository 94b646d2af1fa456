"""Check the weighted-transmission outcome against random feasible rivals."""
import numpy as np

from delayqos import (
    SystemConfig,
    check_proportional_fairness,
    check_weighted_max_min,
    sample_feasible,
    solve_access_point,
)

rng = np.random.default_rng(11)
cfg = SystemConfig.from_arrays(3, [0.9, 0.8, 0.6, 0.7])
rho = np.array([1.0, 3.0, 2.0, 1.0])
q, _ = solve_access_point(rho, cfg)

rivals = sample_feasible(cfg, rng, 500)
mm = sum(bool(check_weighted_max_min(q, alt, rho, cfg)) for alt in rivals)
pf = sum(bool(check_proportional_fairness(q, alt, rho, cfg)) for alt in rivals)
print(f"max-min holds against {mm}/{len(rivals)} rivals")
print(f"proportional fairness holds against {pf}/{len(rivals)} rivals")

# starve the biggest bidder and the check notices
unfair = q.copy()
unfair[1] *= 0.2
caught = any(not check_proportional_fairness(unfair, alt, rho, cfg) for alt in rivals)
print("starved allocation flagged:", caught)
