"""Acceptance criteria 1-8, each at its stated tolerance.

Every test appends one PASS/FAIL line to ``ACCEPTANCE_LINES``; conftest
prints them in the terminal summary. All randomness is seeded.
"""
from __future__ import annotations

import time

import numpy as np

from delayqos import (
    RngSpec,
    SystemConfig,
    WeightedTransmission,
    check_proportional_fairness,
    check_weighted_max_min,
    empirical_vs_analytic,
    idle_time,
    run_bidding_game,
    sample_feasible,
    solve_access_point,
    solve_system,
    verify_kkt_access_point,
)
from delayqos.cli import main
from delayqos.experiments import POLICIES, log_utility_trajectory, paper_config, replicate_paper_experiment
from delayqos.policy_limit import access_point_objective

from conftest import monte_carlo_idle, random_utilities

ACCEPTANCE_LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_1_idle_time_vs_monte_carlo():
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    misses = []
    for k in range(50):
        n, tau = int(rng.integers(1, 7)), int(rng.integers(1, 33))
        p = rng.uniform(0.3, 1.0, n)
        cfg = SystemConfig.from_arrays(tau, p)
        exact = idle_time(range(1, n + 1), cfg)
        mean, se = monte_carlo_idle(p, tau, 10**6, rng)
        if abs(exact - mean) > max(3 * se, 1e-12):
            misses.append((k, exact, mean, se))
    elapsed = time.perf_counter() - start
    ok = not misses and elapsed < 60
    record(1, ok, f"{50 - len(misses)}/50 instances within 3 SE, {elapsed:.1f}s (limit 60s); misses={misses}")
    assert ok


def test_criterion_2_wt_limit_in_simulation():
    rng = np.random.default_rng(1002)
    start = time.perf_counter()
    gaps = []
    for k in range(20):
        n, tau = int(rng.integers(1, 6)), int(rng.integers(1, 11))
        cfg = SystemConfig.from_arrays(tau, rng.uniform(0.5, 0.99, n))
        rho = rng.choice([1.0, 2.0], n)
        report = empirical_vs_analytic(WeightedTransmission(rho), cfg, 10**5, RngSpec(1002, (k,)))
        gaps.append(report.max_gap)
    elapsed = time.perf_counter() - start
    ok = max(gaps) <= 0.01 and elapsed < 120
    record(2, ok, f"max gap {max(gaps):.4f} over 20 instances (limit 0.01), {elapsed:.1f}s (limit 120s)")
    assert ok


def test_criterion_3_access_point_optimality():
    rng = np.random.default_rng(1003)
    failures = []
    for k in range(20):
        n, tau = int(rng.integers(1, 7)), int(rng.integers(1, 11))
        cfg = SystemConfig.from_arrays(tau, rng.uniform(0.3, 1.0, n))
        rho = rng.uniform(0.1, 5.0, n)
        q, cert = solve_access_point(rho, cfg)
        report = verify_kkt_access_point(q, cert, rho, cfg, tol=1e-9)
        best = access_point_objective(q, rho)
        beaten = 0
        for alt in sample_feasible(cfg, rng, 1000):
            with np.errstate(divide="ignore"):
                if access_point_objective(alt, rho) > best:
                    beaten += 1
        if not report or beaten:
            failures.append((k, report.failures, beaten))
    ok = not failures
    record(3, ok, f"KKT at 1e-9 and 1000 sampled alternatives on 20 instances; failures={failures}")
    assert ok


def congested_instance(rng):
    n = int(rng.integers(2, 7))
    tau = int(rng.integers(1, n + 1))
    return SystemConfig.from_arrays(tau, rng.uniform(0.5, 1.0, n), utilities=random_utilities(rng, n))


def test_criterion_4_decomposition_reaches_system_optimum():
    rng = np.random.default_rng(1004)
    not_converged, gaps = [], []
    for k in range(10):
        cfg = congested_instance(rng)
        trace = run_bidding_game(cfg, alpha=0.5, max_iters=500, fp_tol=1e-8)
        if not trace.converged:
            not_converged.append((k, f"{trace.residuals[-1]:.2e}"))
            continue
        q_star, _ = solve_system(cfg)
        gaps.append((k, float(np.max(np.abs(trace.final.q - q_star)))))
    worst = max((g for _, g in gaps), default=0.0)
    ok = bool(gaps) and worst <= 1e-3
    record(
        4,
        ok,
        f"{len(gaps)}/10 converged, worst |q - q_SYSTEM| {worst:.2e} (limit 1e-3); "
        f"not converged (instance, final residual): {not_converged}",
    )
    assert ok


def test_criterion_5_fairness():
    rng = np.random.default_rng(1005)
    violations = 0
    for _ in range(20):
        n, tau = int(rng.integers(1, 7)), int(rng.integers(1, 11))
        cfg = SystemConfig.from_arrays(tau, rng.uniform(0.3, 1.0, n))
        rho = rng.uniform(0.1, 5.0, n)
        q, _ = solve_access_point(rho, cfg)
        for alt in sample_feasible(cfg, rng, 1000):
            violations += not check_weighted_max_min(q, alt, rho, cfg)
            violations += not check_proportional_fairness(q, alt, rho, cfg)
    ok = violations == 0
    record(5, ok, f"{violations} violations over 20 instances x 1000 alternatives x 2 checks")
    assert ok


def test_criterion_6_paper_replication():
    start = time.perf_counter()
    summary = replicate_paper_experiment(range(20), periods=3000, bid_interval=10)
    elapsed = time.perf_counter() - start
    mean = {p: summary.mean(p) for p in POLICIES}
    var = {p: summary.variance(p) for p in POLICIES}
    ordering = mean["WT-Bid"] > mean["P-Rand"] > mean["Rand"] and mean["WT-Bid"] > mean["WT-NoBid"]
    smallest_var = min(var, key=var.get) == "WT-Bid"
    ok = ordering and smallest_var and elapsed < 600
    stats = ", ".join(f"{p} mean {mean[p]:.3f} var {var[p]:.4f}" for p in POLICIES)
    record(6, ok, f"ordering {'holds' if ordering else 'broken'}, WT-Bid variance {'smallest' if smallest_var else 'not smallest'}; {stats}; {elapsed:.0f}s")
    assert ok


def test_criterion_7_wt_convergence_speed():
    cfg = paper_config()
    gaps = []
    for seed in range(20):
        values = log_utility_trajectory(cfg, seed, (10, 500))
        gaps.append(abs(values[10] - values[500]) / abs(values[500]))
    mean_gap = float(np.mean(gaps))
    ok = mean_gap < 0.10
    record(7, ok, f"mean relative gap {mean_gap:.3f} over 20 seeds (limit 0.10); per-seed range {min(gaps):.3f}-{max(gaps):.3f}")
    assert ok


SCENARIO_FILES = {
    "solve": "scenario = solve\ntau = 3\n[client.1]\np = 0.7\nbid = 2\n[client.2]\np = 0.9\n",
    "simulate": "scenario = simulate\ntau = 3\nperiods = 500\nseeds = 0, 1\npolicy = p-rand\n[client.1]\np = 0.7\nkey = 2\n[client.2]\np = 0.9\nkey = 1\n",
    "bid": "scenario = bid\ntau = 3\nbackend = simulation\nseeds = 4\nmax_iters = 40\n[client.1]\np = 0.7\nutility = log\n[client.2]\np = 0.9\nutility = power 2 0.5\n",
}


def test_criterion_8_determinism(tmp_path):
    mismatched = []
    runs = {name: ["--config", str(tmp_path / f"{name}.cfg")] for name in SCENARIO_FILES}
    for name, text in SCENARIO_FILES.items():
        (tmp_path / f"{name}.cfg").write_text(text)
    runs["replicate-paper"] = ["--seeds", "0:2", "--periods", "300"]
    for fmt in ("csv", "json"):
        for verb, extra in runs.items():
            outputs = []
            for attempt in range(2):
                out = tmp_path / f"{verb}-{attempt}.{fmt}"
                assert main([verb, *extra, "--format", fmt, "--out", str(out)]) == 0
                outputs.append(out.read_bytes())
            if outputs[0] != outputs[1]:
                mismatched.append((verb, fmt))
    ok = not mismatched
    record(8, ok, f"byte-identical csv and json output for {sorted(runs)}; mismatched={mismatched}")
    assert ok
