"""Slotted-time simulation of one AP serving N clients over Bernoulli channels.

Each period every client gets one packet. The policy fixes a priority order
at the period start; in every slot the AP transmits to the highest-priority
client whose packet is still undelivered, and the attempt succeeds with
probability ``p_n``. Packets left at the end of the period are dropped.

Because the AP sticks with a client until success, the attempts a client
consumes in a period are a geometric count, independent of the order. The
simulator draws those counts directly (one per client per period) and lays
them out along the priority order; this is the same process as drawing one
Bernoulli per slot, just without the per-slot loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import SystemConfig
from .policy_limit import PolicyParams, analytic_policy_limit, check_bids

# relative gap below which two priority keys are treated as tied
KEY_TIE_TOL = 1e-9
# periods of channel draws generated per block
_BLOCK = 4096


def _order_by_key(keys: np.ndarray) -> np.ndarray:
    """Ascending ``keys`` with near-equal keys broken by ascending index."""
    n = len(keys)
    if n < 2:
        return np.arange(n)
    first = np.argsort(keys, kind="stable")
    ks = keys[first]
    gaps = np.diff(ks) > KEY_TIE_TOL * np.maximum(1.0, np.abs(ks[1:]))
    group = np.concatenate([[0], np.cumsum(gaps)])
    return first[np.lexsort((first, group))]


class Policy:
    """Per-period priority rule. ``order`` returns 0-based client indices, highest priority first."""

    name = "policy"
    uses_rng = False

    def order(self, u: np.ndarray, t: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class WeightedTransmission(Policy):
    """Serve clients in ascending order of slots received divided by bid."""

    rho: np.ndarray
    name = "WT"

    def __post_init__(self):
        object.__setattr__(self, "rho", check_bids(self.rho))

    def order(self, u, t, rng):
        return _order_by_key(u / self.rho)

    def params(self) -> PolicyParams:
        return PolicyParams.weighted_transmission(self.rho)


@dataclass(frozen=True, eq=False)
class GeneralizedTT(Policy):
    """Serve clients in ascending order of ``a * u - b * t``."""

    a: np.ndarray
    b: np.ndarray
    name = "GTT"

    def __post_init__(self):
        p = PolicyParams(self.a, self.b)
        object.__setattr__(self, "a", p.a)
        object.__setattr__(self, "b", p.b)

    def order(self, u, t, rng):
        return _order_by_key(self.a * u - self.b * t)

    def params(self) -> PolicyParams:
        return PolicyParams(self.a, self.b)


@dataclass(frozen=True, eq=False)
class RandomPriority(Policy):
    """Uniformly random priority order, redrawn every period."""

    name = "Rand"
    uses_rng = True

    def order(self, u, t, rng):
        return rng.permutation(len(u))


@dataclass(frozen=True, eq=False)
class PriorityRandom(Policy):
    """Higher ``key`` first; uniformly random among equal keys."""

    key: np.ndarray
    name = "P-Rand"
    uses_rng = True

    def __post_init__(self):
        object.__setattr__(self, "key", np.asarray(self.key, dtype=float))

    def order(self, u, t, rng):
        shuffle = rng.permutation(len(self.key))
        return shuffle[np.argsort(-self.key[shuffle], kind="stable")]


def priority_order(policy: Policy, u, t: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Client ids (1-based), highest priority first."""
    rng = rng if rng is not None else np.random.default_rng(0)
    return policy.order(np.asarray(u, dtype=float), t, rng) + 1


@dataclass(frozen=True)
class RngSpec:
    """Seed plus stream path; PCG64 generators derived through ``SeedSequence``.

    A run uses two child streams: one for channel outcomes, one for the
    policy's own randomness. ``child(i)`` names an independent replication.
    """

    seed: int
    stream: tuple[int, ...] = ()

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=self.stream)

    def child(self, i: int) -> RngSpec:
        return RngSpec(self.seed, self.stream + (int(i),))

    def generators(self) -> tuple[np.random.Generator, np.random.Generator]:
        channel, policy = self.seed_sequence().spawn(2)
        return np.random.Generator(np.random.PCG64(channel)), np.random.Generator(np.random.PCG64(policy))


@dataclass
class SimStats:
    tau: int
    periods_elapsed: int
    u: np.ndarray
    deliveries: np.ndarray
    idle_slots: int
    trajectory: list[tuple[int, np.ndarray]] = field(default_factory=list)
    trace: list[tuple[np.ndarray, np.ndarray]] | None = None

    @property
    def empirical_q(self) -> np.ndarray:
        if self.periods_elapsed == 0:
            return np.zeros_like(self.deliveries, dtype=float)
        return self.deliveries / self.periods_elapsed


def run_simulation(
    policy: Policy,
    cfg: SystemConfig,
    periods: int,
    rng: RngSpec | int,
    checkpoints: Sequence[int] = (),
    record_trace: bool = False,
    initial_u=None,
    start_period: int = 0,
) -> SimStats:
    """Simulate ``periods`` periods and return cumulative statistics.

    ``checkpoints`` lists period counts at which the running delivery ratios
    are recorded in ``SimStats.trajectory``. With ``record_trace`` every
    period's priority order and per-client slot allocation are kept.
    ``initial_u`` seeds the per-client slot counters (default all zero), so a
    run can pick up where an earlier one stopped (pass the elapsed period
    count as ``start_period`` so time-based keys see the right t); ``SimStats.u`` still
    reports the running totals.
    """
    if periods < 1:
        raise ValueError("periods must be at least 1")
    rng = rng if isinstance(rng, RngSpec) else RngSpec(int(rng))
    channel_rng, policy_rng = rng.generators()
    n, tau = cfg.n, cfg.tau
    p = cfg.p
    u = np.zeros(n, dtype=np.int64) if initial_u is None else np.array(initial_u, dtype=np.int64)
    if u.shape != (n,):
        raise ValueError(f"initial_u has shape {u.shape}, expected ({n},)")
    delivered = np.zeros(n, dtype=np.int64)
    idle = 0
    marks = set(int(c) for c in checkpoints)
    stats = SimStats(tau, 0, u, delivered, 0, trace=[] if record_trace else None)
    if n == 0:
        stats.periods_elapsed = periods
        stats.idle_slots = periods * tau
        stats.trajectory = [(c, np.zeros(0)) for c in sorted(marks) if c <= periods]
        return stats

    attempts = np.empty((0, n), dtype=np.int64)
    for k in range(periods):
        row = k % _BLOCK
        if row == 0:
            attempts = channel_rng.geometric(p, size=(min(_BLOCK, periods - k), n))
        g_all = attempts[row]
        order = policy.order(u, (start_period + k) * tau, policy_rng)
        g = g_all[order]
        finish = np.cumsum(g)
        alloc = np.clip(tau - (finish - g), 0, g)
        u[order] += alloc
        delivered[order] += finish <= tau
        if finish[-1] < tau:
            idle += tau - int(finish[-1])
        if record_trace:
            stats.trace.append((order + 1, alloc.copy()))
        if k + 1 in marks:
            stats.trajectory.append((k + 1, delivered / (k + 1)))

    stats.periods_elapsed = periods
    stats.idle_slots = idle
    return stats


@dataclass
class ComparisonReport:
    empirical_q: np.ndarray
    analytic_q: np.ndarray
    max_gap: float
    ci_low: np.ndarray
    ci_high: np.ndarray
    within_tol: bool


def empirical_vs_analytic(policy: WeightedTransmission | GeneralizedTT, cfg: SystemConfig, periods: int, rng) -> ComparisonReport:
    """Simulated delivery ratios against the analytic policy limit.

    Confidence intervals are normal-approximation 95% binomial intervals.
    """
    stats = run_simulation(policy, cfg, periods, rng)
    _, q = analytic_policy_limit(policy.params(), cfg)
    emp = stats.empirical_q
    half = 1.96 * np.sqrt(emp * (1.0 - emp) / periods)
    gap = float(np.max(np.abs(emp - q))) if cfg.n else 0.0
    return ComparisonReport(emp, q, gap, emp - half, emp + half, gap <= cfg.sim_tol)
