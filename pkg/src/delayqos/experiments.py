"""The 30-client VoIP-style experiment: WT with bidding against fixed-bid WT
and two random-priority baselines.

Setup: 32 slots per period, client n has p_n = (50 + n)% and utility
gamma_n * (q**alpha_n - 1) / alpha_n with gamma_n = (n mod 3) + 1 and
alpha_n = 0.3 + 0.1 * (n mod 5). Fixed bids are rho_n = (n mod 2) + 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import SIM_Q_FLOOR, SimulationBackend, run_bidding_game
from .model import SystemConfig
from .simulator import PriorityRandom, RandomPriority, RngSpec, WeightedTransmission, run_simulation
from .utility import PowerUtility, total_utility

PAPER_N = 30
PAPER_TAU = 32
POLICIES = ("WT-Bid", "WT-NoBid", "Rand", "P-Rand")


def paper_gamma(n: int) -> int:
    return (n % 3) + 1


def paper_alpha(n: int) -> float:
    return round(0.3 + 0.1 * (n % 5), 10)


def paper_bids(n_clients: int = PAPER_N) -> np.ndarray:
    return np.array([(n % 2) + 1 for n in range(1, n_clients + 1)], dtype=float)


def paper_config(n_clients: int = PAPER_N, tau: int = PAPER_TAU) -> SystemConfig:
    ns = range(1, n_clients + 1)
    return SystemConfig.from_arrays(
        tau,
        [(50 + n) / 100 for n in ns],
        utilities=[PowerUtility(paper_gamma(n), paper_alpha(n)) for n in ns],
        bids=paper_bids(n_clients),
    )


@dataclass
class PolicyRun:
    policy: str
    seed: int
    q: np.ndarray
    total_utility: float


def run_policy(policy: str, cfg: SystemConfig, periods: int, seed: int, bid_interval: int = 10, alpha: float = 0.5) -> PolicyRun:
    """One replication of one policy; delivery ratios are averaged over the whole run."""
    rng = RngSpec(seed).child(POLICIES.index(policy))
    if policy == "WT-Bid":
        rounds = max(1, periods // bid_interval)
        trace = run_bidding_game(
            cfg, alpha=alpha, max_iters=rounds, fp_tol=0.0, ap_backend=SimulationBackend(bid_interval, rng)
        )
        deliveries = sum(s.deliveries for s in trace.states)
        q = deliveries / (bid_interval * len(trace.states))
    else:
        if policy == "WT-NoBid":
            sched = WeightedTransmission(cfg.initial_bids)
        elif policy == "Rand":
            sched = RandomPriority()
        elif policy == "P-Rand":
            sched = PriorityRandom([u.gamma for u in cfg.utilities])
        else:
            raise ValueError(f"unknown policy {policy!r}")
        q = run_simulation(sched, cfg, periods, rng).empirical_q
    return PolicyRun(policy, seed, q, total_utility(q, cfg.utilities))


@dataclass
class ReplicationSummary:
    runs: list[PolicyRun]

    def utilities(self, policy: str) -> np.ndarray:
        return np.array([r.total_utility for r in self.runs if r.policy == policy])

    def mean(self, policy: str) -> float:
        return float(self.utilities(policy).mean())

    def variance(self, policy: str) -> float:
        # across-seed sample variance; zero for a single seed
        u = self.utilities(policy)
        return float(u.var(ddof=1)) if len(u) > 1 else 0.0


def replicate_paper_experiment(
    seeds, periods: int = 3000, bid_interval: int = 10, policies=POLICIES, cfg: SystemConfig | None = None
) -> ReplicationSummary:
    cfg = cfg or paper_config()
    runs = [run_policy(p, cfg, periods, int(s), bid_interval) for p in policies for s in seeds]
    return ReplicationSummary(runs)


def log_utility_trajectory(cfg: SystemConfig, seed: int, checkpoints, rho=None) -> dict[int, float]:
    """sum(rho * log q) of fixed-bid WT at each checkpoint, zero ratios floored at 0.001."""
    rho = cfg.initial_bids if rho is None else np.asarray(rho, dtype=float)
    stats = run_simulation(WeightedTransmission(rho), cfg, max(checkpoints), RngSpec(seed), checkpoints=checkpoints)
    return {k: float(np.sum(rho * np.log(np.maximum(q, SIM_Q_FLOOR)))) for k, q in stats.trajectory}
