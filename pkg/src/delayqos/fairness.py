"""Weighted max-min and weighted proportional fairness checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemConfig, all_idle_times, check_delivery, is_feasible, subset_sums
from .policy_limit import check_bids, solve_access_point

FAIRNESS_TOL = 1e-7


@dataclass
class FairnessReport:
    criterion: str
    q_alt: np.ndarray
    verdict: bool
    witness: object
    """max-min: {improved client id: witness id or None}; proportional: the weighted sum."""

    def __bool__(self):
        return self.verdict


def _require_feasible(q_alt, cfg):
    q_alt = check_delivery(q_alt, cfg)
    report = is_feasible(q_alt, cfg)
    if not report:
        raise ValueError(
            f"alternative vector is infeasible: subset {sorted(report.worst_subset)} over by {-report.slack:.3g}"
        )
    return q_alt


def check_weighted_max_min(q, q_alt, rho, cfg: SystemConfig, tol: float = FAIRNESS_TOL) -> FairnessReport:
    """Any client gaining under ``q_alt`` must be offset by a loser j whose
    workload-to-bid ratio at ``q`` is no larger than the gainer's.

    Gains are measured in delivery ratio (> tol). Losses are measured in
    workload against tol / (2N): feasibility spreads a forced loss of at least
    tol slots over at most N - 1 clients, so the smaller band still sees it.
    """
    q = check_delivery(q, cfg)
    q_alt = _require_feasible(q_alt, cfg)
    rho = check_bids(rho)
    p = cfg.p
    ratio = q / p / rho
    w, w_alt = q / p, q_alt / p
    loss_band = tol / (2 * max(cfg.n, 1))
    witness = {}
    for i in np.flatnonzero(q_alt > q + tol):
        losers = np.flatnonzero((w_alt < w - loss_band) & (ratio <= ratio[i] + tol * max(1.0, ratio[i])))
        witness[int(i) + 1] = int(losers[0]) + 1 if len(losers) else None
    verdict = all(j is not None for j in witness.values())
    return FairnessReport("max-min", q_alt, verdict, witness)


def check_proportional_fairness(q, q_alt, rho, cfg: SystemConfig, tol: float = FAIRNESS_TOL) -> FairnessReport:
    q = check_delivery(q, cfg)
    if np.any(q <= 0):
        raise ValueError("proportional fairness needs every q_n > 0")
    q_alt = _require_feasible(q_alt, cfg)
    rho = check_bids(rho)
    w, w_alt = q / cfg.p, q_alt / cfg.p
    total = float(np.sum((w_alt - w) / (w / rho)))
    return FairnessReport("proportional", q_alt, total <= tol, total)


def _max_feasible_scale(x: np.ndarray, cfg: SystemConfig) -> float:
    capacity = (cfg.tau - all_idle_times(cfg))[1:]
    load = subset_sums(x / cfg.p)[1:]
    with np.errstate(divide="ignore"):
        scales = np.where(load > 0, capacity / load, np.inf)
    return float(min(1.0, scales.min()))


def sample_feasible(cfg: SystemConfig, rng: np.random.Generator | int, count: int) -> list[np.ndarray]:
    """Feasible delivery vectors with good coverage of the boundary.

    Cycles through three kinds of draw: a uniform point of [0, 1]^N scaled
    onto the boundary, a uniform point scaled to a random interior fraction,
    and the WT optimum under random bids (kept on the boundary or shrunk).
    Boundary scaling uses the largest feasible factor times 1 - 1e-12.
    """
    cfg.check_enumerable()
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    out = []
    for k in range(count):
        if k % 3 == 2:
            x, _ = solve_access_point(rng.uniform(0.1, 10.0, cfg.n), cfg)
            shrink = rng.choice([1.0, rng.uniform()])
        else:
            x = rng.uniform(size=cfg.n)
            shrink = 1.0 if k % 3 == 0 else rng.uniform()
        q = x * _max_feasible_scale(x, cfg) * (1.0 - 1e-12) * shrink
        out.append(np.clip(q, 0.0, 1.0))
    return out
