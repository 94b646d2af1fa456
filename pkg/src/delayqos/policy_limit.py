"""Limiting delivery ratios of transmission-time priority policies.

A generalized transmission-time policy orders clients at each period start by
``a_n * u_n(t) - b_n * t`` (``u_n`` = slots spent on client n so far). Its
long-run delivery ratios are given by a nested family of "bottleneck" sets
H_1 < H_2 < ... < H_K, each with a level theta_k: clients first added in H_k
receive ``q_n = tau * p_n * (b_n + theta_k) / a_n``.

Weighted transmission (WT) is the member with ``a_n = 1 / rho_n`` and
``b_n = 0``; its limit maximizes ``sum(rho_n * log(q_n))`` over the feasible
region, and the nested sets give the Lagrange multipliers that prove it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    SystemConfig,
    all_idle_times,
    check_delivery,
    constraint_slacks,
    ids_of,
    is_feasible,
    mask_of,
    popcounts,
    subset_sums,
)


class LimitError(RuntimeError):
    """The nested-set recursion produced an inconsistent result."""


@dataclass(frozen=True)
class PolicyParams:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("a and b must be 1-d arrays of equal length")
        if np.any(a <= 0):
            raise ValueError("a must be positive")
        if np.any(b < 0):
            raise ValueError("b must be non-negative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def weighted_transmission(cls, rho) -> PolicyParams:
        rho = check_bids(rho)
        return cls(a=1.0 / rho, b=np.zeros_like(rho))

    @classmethod
    def time_based_debt(cls, q, p) -> PolicyParams:
        q = np.asarray(q, dtype=float)
        return cls(a=np.ones_like(q), b=q / np.asarray(p, dtype=float))


@dataclass(frozen=True)
class LimitDecomposition:
    levels: tuple[tuple[frozenset[int], float], ...]

    @property
    def sets(self) -> list[frozenset[int]]:
        return [h for h, _ in self.levels]

    @property
    def thetas(self) -> np.ndarray:
        return np.array([t for _, t in self.levels])

    def level_of(self, client_id: int) -> int:
        """0-based index k of the first level set containing ``client_id``."""
        for k, (h, _) in enumerate(self.levels):
            if client_id in h:
                return k
        raise KeyError(client_id)


@dataclass
class KKTCertificate:
    """Lagrange multipliers for one of the three programs.

    ``context`` is ``"access-point"`` (zeta over subsets, mu per client),
    ``"system"`` (zeta holds lambda_S, mu holds nu_n) or ``"client"`` (xi).
    """

    zeta: dict[frozenset[int], float]
    mu: np.ndarray
    context: str = "access-point"
    xi: float | None = None

    def load(self, n: int) -> np.ndarray:
        """sum of zeta_S over subsets S containing each client."""
        total = np.zeros(n)
        for subset, z in self.zeta.items():
            for cid in subset:
                total[cid - 1] += z
        return total


@dataclass
class KKTReport:
    passed: bool
    stationarity: float
    complementary: float
    mu_slackness: float
    min_multiplier: float
    min_slack: float
    failures: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.passed


def check_bids(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or np.any(~(rho > 0)) or not np.all(np.isfinite(rho)):
        raise ValueError(f"bids must be positive and finite, got {rho}")
    return rho


def _choose_level(cands: np.ndarray, vals: np.ndarray, sizes: np.ndarray, tol: float) -> int:
    # argmin, widened to a tie band; then largest set; then lexicographically smallest ids
    best = vals.min()
    tied = np.flatnonzero(vals <= best + tol * max(1.0, abs(best)))
    widest = tied[sizes[tied] == sizes[tied].max()]
    if len(widest) == 1:
        return int(widest[0])
    return int(min(widest, key=lambda i: sorted(ids_of(int(cands[i])))))


def analytic_policy_limit(params: PolicyParams, cfg: SystemConfig) -> tuple[LimitDecomposition, np.ndarray]:
    """Nested bottleneck sets and limiting delivery ratios of a policy."""
    cfg.check_enumerable()
    n, tau = cfg.n, cfg.tau
    if params.a.shape != (n,):
        raise ValueError(f"policy parameters have length {len(params.a)}, expected {n}")
    if n == 0:
        return LimitDecomposition(()), np.zeros(0)

    idle = all_idle_times(cfg)
    masks = np.arange(1 << n)
    sum_inv_a = subset_sums(1.0 / params.a)
    sum_b_over_a = subset_sums(params.b / params.a)
    sizes = popcounts(n)
    full = (1 << n) - 1
    p = cfg.p

    q = np.zeros(n)
    levels = []
    prev_mask, prev_theta = 0, -math.inf
    while prev_mask != full:
        cands = masks[((masks & prev_mask) == prev_mask) & (masks != prev_mask)]
        added_inv = sum_inv_a[cands] - sum_inv_a[prev_mask]
        added_ba = sum_b_over_a[cands] - sum_b_over_a[prev_mask]
        vals = ((idle[prev_mask] - idle[cands]) / tau - added_ba) / added_inv
        i = _choose_level(cands, vals, sizes[cands], cfg.solver_tol)
        mask, theta = int(cands[i]), float(vals[i])
        if not theta > prev_theta:
            raise LimitError(f"level values not increasing: {prev_theta} then {theta}")
        new = ids_of(mask & ~prev_mask)
        for cid in new:
            j = cid - 1
            q[j] = tau * p[j] * (params.b[j] + theta) / params.a[j]
        levels.append((ids_of(mask), theta))
        prev_mask, prev_theta = mask, theta

    if np.any(q > 1.0 + cfg.solver_tol) or np.any(q < -cfg.solver_tol):
        raise LimitError(f"limiting delivery ratios fall outside [0, 1]: {q}")
    return LimitDecomposition(tuple(levels)), np.clip(q, 0.0, 1.0)


def solve_access_point(rho, cfg: SystemConfig) -> tuple[np.ndarray, KKTCertificate]:
    """Maximize sum(rho * log q) over the feasible region via the WT limit.

    The certificate puts weight only on the nested level sets:
    zeta(H_K) = 1 / (tau * theta_K) and
    zeta(H_k) = 1 / (tau * theta_k) - 1 / (tau * theta_{k+1}).
    """
    rho = check_bids(rho)
    decomposition, q = analytic_policy_limit(PolicyParams.weighted_transmission(rho), cfg)
    inv = 1.0 / (cfg.tau * decomposition.thetas)
    zeta = {}
    for k, h in enumerate(decomposition.sets):
        zeta[h] = float(inv[k] - inv[k + 1]) if k + 1 < len(inv) else float(inv[k])
    return q, KKTCertificate(zeta=zeta, mu=np.zeros(cfg.n), context="access-point")


def kkt_residuals(gradient: np.ndarray, q: np.ndarray, cert: KKTCertificate, cfg: SystemConfig, tol: float) -> KKTReport:
    """Check the KKT system of max f(q) subject to the subset constraints and q >= 0.

    ``gradient`` is the objective gradient at ``q``; stationarity reads
    -gradient_n + sum_{S containing n} zeta_S / p_n - mu_n = 0.
    """
    failures = []
    p = cfg.p
    stat = -gradient + cert.load(cfg.n) / p - cert.mu
    scale = np.maximum(1.0, np.abs(gradient))
    stationarity = float(np.max(np.abs(stat) / scale)) if cfg.n else 0.0
    if not stationarity <= tol:
        failures.append(f"stationarity residual {stationarity:.3g} exceeds {tol:g}")

    slacks = constraint_slacks(q, cfg)
    min_slack = float(slacks[1:].min()) if cfg.n else math.inf
    if min_slack < -tol:
        failures.append(f"constraint violated by {-min_slack:.3g}")

    complementary = 0.0
    for subset, z in cert.zeta.items():
        gap = abs(z * slacks[mask_of(subset, cfg)]) / max(1.0, abs(z))
        complementary = max(complementary, float(gap))
    if complementary > tol:
        failures.append(f"complementary slackness residual {complementary:.3g} exceeds {tol:g}")

    mu_slackness = float(np.max(np.abs(cert.mu * q))) if cfg.n else 0.0
    if mu_slackness > tol:
        failures.append(f"mu * q residual {mu_slackness:.3g} exceeds {tol:g}")

    multipliers = list(cert.zeta.values()) + list(cert.mu)
    min_multiplier = float(min(multipliers)) if multipliers else 0.0
    if min_multiplier < 0:
        failures.append(f"negative multiplier {min_multiplier:.3g}")

    return KKTReport(
        passed=not failures,
        stationarity=stationarity,
        complementary=complementary,
        mu_slackness=mu_slackness,
        min_multiplier=min_multiplier,
        min_slack=min_slack,
        failures=failures,
    )


def verify_kkt_access_point(q, cert: KKTCertificate, rho, cfg: SystemConfig, tol: float | None = None) -> KKTReport:
    q = check_delivery(q, cfg)
    rho = check_bids(rho)
    tol = cfg.solver_tol if tol is None else tol
    if np.any(q <= 0):
        report = KKTReport(False, math.inf, 0.0, 0.0, 0.0, 0.0)
        report.failures.append("objective gradient rho/q undefined at q = 0")
        return report
    return kkt_residuals(rho / q, q, cert, cfg, tol)


def special_case_tot(rho, cfg: SystemConfig) -> np.ndarray | None:
    """Closed-form solution when only the all-clients constraint binds.

    Non-idle slots are shared in proportion to the bids:
    q_n / p_n = rho_n / sum(rho) * (tau - I_TOT). Returns None when that point
    is infeasible or leaves [0, 1].
    """
    rho = check_bids(rho)
    idle_tot = all_idle_times(cfg)[-1]
    q = cfg.p * rho / rho.sum() * (cfg.tau - idle_tot)
    if np.any(q > 1.0 + cfg.solver_tol):
        return None
    q = np.minimum(q, 1.0)
    if not is_feasible(q, cfg):
        return None
    return q


def access_point_objective(q, rho) -> float:
    return float(np.sum(np.asarray(rho) * np.log(np.asarray(q))))
