"""Thirty clients, four scheduling policies, a handful of seeds.

Bidding weighted transmission is compared with fixed bids, uniform random
priorities and fixed-key priorities by total utility.
"""
from delayqos.experiments import POLICIES, log_utility_trajectory, paper_config, replicate_paper_experiment

summary = replicate_paper_experiment(range(3), periods=1000)
for policy in POLICIES:
    print(f"{policy:9s} mean {summary.mean(policy):8.3f}  var {summary.variance(policy):.4f}")

# how quickly fixed-bid weighted transmission settles
values = log_utility_trajectory(paper_config(), 0, (10, 100, 500))
for period, value in values.items():
    print(f"after {period:4d} periods: {value:.3f}")
