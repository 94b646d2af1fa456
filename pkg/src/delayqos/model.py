"""Periods, channels, workloads and the subset feasibility region.

A period is ``tau`` slots long. Every client receives one packet at the start
of each period; the AP keeps transmitting to a client until it succeeds
(probability ``p`` per attempt) or the period ends. The number of attempts a
client needs is therefore geometric, and the busy time of any work-conserving
schedule over a subset ``S`` is the sum of those geometric counts truncated
at ``tau``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .utility import UtilityFunction


class SubsetLimitError(ValueError):
    """Raised when an operation would enumerate 2**N subsets for N too large."""


@dataclass(frozen=True)
class ClientSpec:
    id: int
    p: float
    utility: UtilityFunction | None = None
    initial_bid: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"client {self.id}: p must be in (0, 1], got {self.p}")
        if not self.initial_bid > 0.0:
            raise ValueError(f"client {self.id}: initial_bid must be positive, got {self.initial_bid}")


@dataclass(frozen=True, eq=False)
class SystemConfig:
    tau: int
    clients: tuple[ClientSpec, ...]
    subset_limit: int = 20
    solver_tol: float = 1e-9
    sim_tol: float = 1e-2
    _idle_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "clients", tuple(self.clients))
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be a positive integer, got {self.tau}")
        ids = [c.id for c in self.clients]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"client ids must be 1..N in order, got {ids}")

    @property
    def n(self) -> int:
        return len(self.clients)

    @property
    def p(self) -> np.ndarray:
        return np.array([c.p for c in self.clients], dtype=float)

    @property
    def initial_bids(self) -> np.ndarray:
        return np.array([c.initial_bid for c in self.clients], dtype=float)

    @property
    def utilities(self) -> list:
        return [c.utility for c in self.clients]

    def check_enumerable(self) -> None:
        if self.n > self.subset_limit:
            raise SubsetLimitError(
                f"{self.n} clients exceeds subset_limit={self.subset_limit}; "
                "subset enumeration is exponential in N"
            )

    @classmethod
    def from_arrays(cls, tau: int, p: Sequence[float], utilities=None, bids=None, **kwargs) -> SystemConfig:
        """Build a config from per-client arrays; ids are assigned 1..N."""
        n = len(p)
        utilities = utilities if utilities is not None else [None] * n
        bids = bids if bids is not None else [1.0] * n
        clients = tuple(
            ClientSpec(id=i + 1, p=float(p[i]), utility=utilities[i], initial_bid=float(bids[i]))
            for i in range(n)
        )
        return cls(tau=int(tau), clients=clients, **kwargs)


# Vectors are plain float arrays indexed by client position (id - 1).
DeliveryVector = np.ndarray
WorkloadVector = np.ndarray
BidVector = np.ndarray


def check_delivery(q, cfg: SystemConfig) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (cfg.n,):
        raise ValueError(f"expected {cfg.n} delivery ratios, got shape {q.shape}")
    if np.any(q < 0.0) or np.any(q > 1.0):
        raise ValueError(f"delivery ratios must lie in [0, 1], got {q}")
    return q


def workload(q, cfg: SystemConfig) -> WorkloadVector:
    """Expected slots per period needed to sustain delivery ratios ``q``."""
    q = check_delivery(q, cfg)
    return q / cfg.p


def mask_of(subset: Iterable[int], cfg: SystemConfig) -> int:
    mask = 0
    for cid in subset:
        if not (isinstance(cid, (int, np.integer)) and 1 <= cid <= cfg.n):
            raise ValueError(f"unknown client id {cid!r} (valid ids are 1..{cfg.n})")
        mask |= 1 << (int(cid) - 1)
    return mask


def ids_of(mask: int) -> frozenset[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i + 1)
        mask >>= 1
        i += 1
    return frozenset(out)


def attempts_pmf(p: float, tau: int) -> np.ndarray:
    """P(G = k) for k = 0..tau, G geometric on {1, 2, ...}; mass above tau dropped."""
    k = np.arange(tau + 1)
    pmf = p * (1.0 - p) ** np.maximum(k - 1, 0)
    pmf[0] = 0.0
    return pmf


def _shift_matrix(p: float, tau: int) -> np.ndarray:
    # row j -> distribution of (j + G) restricted to 0..tau
    pmf = attempts_pmf(p, tau)
    t = np.zeros((tau + 1, tau + 1))
    for j in range(tau + 1):
        t[j, j:] = pmf[: tau + 1 - j]
    return t


def busy_distribution(subset: Iterable[int], cfg: SystemConfig) -> np.ndarray:
    """Sub-probability mass of total attempts = k for k = 0..tau over ``subset``."""
    mask = mask_of(subset, cfg)
    dist = np.zeros(cfg.tau + 1)
    dist[0] = 1.0
    for cid in sorted(ids_of(mask)):
        dist = np.convolve(dist, attempts_pmf(cfg.clients[cid - 1].p, cfg.tau))[: cfg.tau + 1]
    return dist


def idle_time(subset: Iterable[int], cfg: SystemConfig) -> float:
    """Expected forced-idle slots per period when only ``subset`` is served."""
    dist = busy_distribution(subset, cfg)
    return float(dist @ (cfg.tau - np.arange(cfg.tau + 1)))


def all_idle_times(cfg: SystemConfig) -> np.ndarray:
    """Idle time of every subset, indexed by bitmask (bit i is client i + 1).

    Built by doubling: the busy distributions of subsets that contain client
    ``i`` are those of subsets without it pushed through one geometric
    convolution. The final client's convolution is folded into the idle
    weights so the widest array never has to be stored.
    """
    cfg.check_enumerable()
    cached = cfg._idle_cache.get("all")
    if cached is not None:
        return cached
    tau = cfg.tau
    weights = tau - np.arange(tau + 1, dtype=float)
    if cfg.n == 0:
        out = np.array([float(tau)])
    else:
        dists = np.zeros((1, tau + 1))
        dists[0, 0] = 1.0
        for c in cfg.clients[:-1]:
            dists = np.concatenate([dists, dists @ _shift_matrix(c.p, tau)])
        last = _shift_matrix(cfg.clients[-1].p, tau)
        out = np.concatenate([dists @ weights, dists @ (last @ weights)])
    out.setflags(write=False)
    cfg._idle_cache["all"] = out
    return out


def subset_sums(values: np.ndarray) -> np.ndarray:
    """Sum of ``values`` over every subset, indexed by bitmask."""
    sums = np.zeros(1)
    for v in values:
        sums = np.concatenate([sums, sums + v])
    return sums


def popcounts(n: int) -> np.ndarray:
    counts = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        counts = np.concatenate([counts, counts + 1])
    return counts


@dataclass
class FeasibilityReport:
    feasible: bool
    worst_subset: frozenset[int]
    slack: float
    """Minimum over nonempty S of (tau - I_S) - sum_{i in S} q_i / p_i."""

    def __bool__(self):
        return self.feasible


def constraint_slacks(q, cfg: SystemConfig) -> np.ndarray:
    """(tau - I_S) - sum_S q/p for every subset mask; entry 0 is the empty set."""
    w = workload(q, cfg)
    return (cfg.tau - all_idle_times(cfg)) - subset_sums(w)


def is_feasible(q, cfg: SystemConfig) -> FeasibilityReport:
    slacks = constraint_slacks(q, cfg)
    if cfg.n == 0:
        return FeasibilityReport(True, frozenset(), float("inf"))
    worst = int(np.argmin(slacks[1:])) + 1
    slack = float(slacks[worst])
    return FeasibilityReport(slack >= -cfg.solver_tol, ids_of(worst), slack)


def saturation_ratio(cfg: SystemConfig) -> np.ndarray:
    """Delivery ratio each client gets when served alone: 1 - (1 - p)^tau."""
    return 1.0 - (1.0 - cfg.p) ** cfg.tau
