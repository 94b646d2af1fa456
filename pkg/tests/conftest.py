"""Shared instance generators and independent oracles for the test suite.

The oracles here deliberately avoid the package's own machinery: idle times
come from explicit enumeration or Monte Carlo sampling, bottleneck sets from
plain itertools loops, and optima from scipy's SLSQP.
"""
from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy.optimize import minimize

from delayqos import LogUtility, PowerUtility, SystemConfig


def enumerate_idle(ps, tau) -> float:
    """E[max(0, tau - sum G_n)] by enumerating attempt counts 1..tau (plus 'more')."""
    total = 0.0
    choices = [range(1, tau + 2) for _ in ps]  # tau + 1 stands for "more than tau"
    for combo in itertools.product(*choices):
        prob = 1.0
        for g, p in zip(combo, ps):
            prob *= (1 - p) ** tau if g == tau + 1 else p * (1 - p) ** (g - 1)
        if prob == 0.0:
            continue
        total += prob * max(0, tau - sum(combo))
    return total


def monte_carlo_idle(ps, tau, periods, rng) -> tuple[float, float]:
    """Sample mean and standard error of the idle slots per period."""
    if len(ps) == 0:
        return float(tau), 0.0
    g = rng.geometric(np.asarray(ps), size=(periods, len(ps))).sum(axis=1)
    idle = np.maximum(0, tau - g)
    return float(idle.mean()), float(idle.std(ddof=1) / np.sqrt(periods))


def brute_policy_limit(a, b, ps, tau):
    """Nested bottleneck recursion written out with explicit subset loops."""
    n = len(ps)
    ids = range(1, n + 1)
    idle = {}
    for r in range(n + 1):
        for s in itertools.combinations(ids, r):
            idle[frozenset(s)] = enumerate_idle([ps[i - 1] for i in s], tau)
    prev, q, levels = frozenset(), np.zeros(n), []
    while len(prev) < n:
        best = None
        for s, i_s in idle.items():
            if not prev < s:
                continue
            new = s - prev
            val = ((idle[prev] - i_s) / tau - sum(b[i - 1] / a[i - 1] for i in new)) / sum(1 / a[i - 1] for i in new)
            key = (round(val, 9), -len(s), sorted(s))
            if best is None or key < best[0]:
                best = (key, s, val)
        _, s, theta = best
        for i in s - prev:
            q[i - 1] = tau * ps[i - 1] * (b[i - 1] + theta) / a[i - 1]
        levels.append((s, theta))
        prev = s
    return levels, q


def slsqp_maximize(objective, gradient, cfg: SystemConfig, x0=None):
    """Maximize a smooth objective over the feasible region with scipy."""
    n = cfg.n
    subsets = [s for r in range(1, n + 1) for s in itertools.combinations(range(n), r)]
    ps = cfg.p
    caps = [cfg.tau - enumerate_idle([ps[i] for i in s], cfg.tau) for s in subsets]
    cons = [
        {"type": "ineq", "fun": (lambda x, s=s, c=c: c - sum(x[i] / ps[i] for i in s))}
        for s, c in zip(subsets, caps)
    ]
    x0 = np.full(n, 1e-3) if x0 is None else x0
    res = minimize(
        lambda x: -objective(x),
        x0,
        jac=lambda x: -gradient(x),
        bounds=[(1e-9, 1.0)] * n,
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 1000},
    )
    return res.x


def random_instance(rng, n_max=6, tau_max=8, p_range=(0.3, 1.0), congested=False) -> SystemConfig:
    n = int(rng.integers(1, n_max + 1))
    tau = int(rng.integers(1, (n if congested else tau_max) + 1))
    p = rng.uniform(*p_range, size=n)
    return SystemConfig.from_arrays(tau, p)


def random_utilities(rng, n):
    out = []
    for _ in range(n):
        if rng.uniform() < 0.5:
            out.append(LogUtility(float(rng.uniform(0.5, 3.0))))
        else:
            out.append(PowerUtility(float(rng.integers(1, 4)), float(rng.choice([0.3, 0.4, 0.5, 0.6, 0.7]))))
    return out


@pytest.fixture
def two_unit_clients():
    return SystemConfig.from_arrays(1, [1.0, 1.0])


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
