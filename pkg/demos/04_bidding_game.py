"""Clients bid, the access point allocates, and prices settle.

Once the bids stop moving the outcome coincides with the allocation that
maximizes total utility, which we solve for directly as a check.
"""
import numpy as np

from delayqos import LogUtility, PowerUtility, SimulationBackend, SystemConfig, run_bidding_game, solve_system

utilities = [LogUtility(1.0), LogUtility(2.0), PowerUtility(2.0, 0.5)]
cfg = SystemConfig.from_arrays(2, [0.9, 0.7, 0.8], utilities=utilities)

trace = run_bidding_game(cfg, alpha=0.5, max_iters=500, fp_tol=1e-8)
print(trace.status, "after", len(trace.residuals), "rounds")
print("bids:     ", np.round(trace.final.rho, 4))
print("game q:   ", np.round(trace.final.q, 6))

q_star, _ = solve_system(cfg)
print("optimal q:", np.round(q_star, 6))

# the same game with the access point measured by simulation
sim = run_bidding_game(cfg, alpha=0.5, max_iters=100, fp_tol=0, ap_backend=SimulationBackend(200, rng=3))
print("simulated game q:", np.round(sim.final.q, 3))
