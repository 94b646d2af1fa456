"""Command-line front end: config files, scenario runners, CSV/JSON output.

Config grammar (one setting per line, ``#`` starts a comment)::

    scenario = bid            # solve | simulate | bid | replicate-paper
    tau = 4
    alpha = 0.5

    [client.1]
    p = 0.9
    bid = 2
    utility = power 2 0.5     # log [weight] | power <gamma> <alpha>

Global keys: scenario, tau, program (access-point | system), policy
(wt | gtt | rand | p-rand), periods, seeds (``0, 1, 2`` or ``0:20``),
bid_interval, alpha, max_iters, fp_tol, backend (analytic | simulation),
subset_limit, solver_tol, sim_tol. Client keys: p, bid, utility, a, b, key.
Clients must be numbered 1..N. Every scenario is a thin wrapper around the
library; nothing numerical happens here.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, replace

from .equilibrium import SimulationBackend, run_bidding_game, solve_system, verify_kkt_system
from .experiments import POLICIES, log_utility_trajectory, paper_config, replicate_paper_experiment
from .model import ClientSpec, SystemConfig
from .policy_limit import PolicyParams, access_point_objective, analytic_policy_limit, solve_access_point, verify_kkt_access_point
from .simulator import GeneralizedTT, PriorityRandom, RandomPriority, RngSpec, WeightedTransmission, empirical_vs_analytic, run_simulation
from .utility import LogUtility, PowerUtility, total_utility

SCENARIOS = ("solve", "simulate", "bid", "replicate-paper")
PROGRAMS = ("access-point", "system")
SIM_POLICIES = ("wt", "gtt", "rand", "p-rand")
BACKENDS = ("analytic", "simulation")

# every metric name a ResultRow may carry
METRICS = frozenset(
    {
        "q",  # delivery ratio (analytic, final or cumulative empirical)
        "analytic_q",
        "rho",
        "psi",
        "theta",  # level value of the client's bottleneck set
        "multiplier_load",  # sum of subset multipliers over sets containing the client
        "u",  # slots spent on the client
        "deliveries",
        "objective",
        "total_utility",
        "kkt_passed",
        "kkt_stationarity",
        "levels",
        "max_gap",
        "within_tol",
        "idle_slots",
        "periods",
        "iterations",
        "converged",
        "residual",
        "mean_total_utility",
        "var_total_utility",
        "log_objective_short",
        "log_objective_long",
        "relative_gap",
    }
)


class ConfigError(ValueError):
    """Config text rejected; ``errors`` lists (line number, message)."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        super().__init__("; ".join(f"line {ln}: {msg}" for ln, msg in errors))


@dataclass(frozen=True)
class ClientEntry:
    id: int
    p: float
    bid: float = 1.0
    utility: tuple = ()  # () | ("log", weight) | ("power", gamma, alpha)
    a: float | None = None
    b: float | None = None
    key: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "solve"
    tau: int = 32
    clients: tuple[ClientEntry, ...] = ()
    program: str = "access-point"
    policy: str = "wt"
    periods: int = 1000
    seeds: tuple[int, ...] = (0,)
    bid_interval: int = 10
    alpha: float = 0.5
    max_iters: int = 500
    fp_tol: float = 1e-8
    backend: str = "analytic"
    subset_limit: int = 20
    solver_tol: float = 1e-9
    sim_tol: float = 1e-2


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _seeds(text):
    text = text.strip()
    if ":" in text:
        lo, hi = (_int(t) for t in text.split(":"))
        if hi <= lo:
            raise ValueError(f"empty seed range {text!r}")
        return tuple(range(lo, hi))
    seeds = tuple(_int(t) for t in text.split(",") if t.strip())
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def _utility(text):
    tokens = text.split()
    if not tokens:
        raise ValueError("empty utility")
    kind, args = tokens[0].lower(), [float(t) for t in tokens[1:]]
    if kind == "log" and len(args) <= 1:
        weight = args[0] if args else 1.0
        LogUtility(weight)
        return ("log", weight)
    if kind == "power" and len(args) == 2:
        PowerUtility(*args)
        return ("power", args[0], args[1])
    raise ValueError(f"utility must be 'log [weight]' or 'power <gamma> <alpha>', got {text!r}")


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


def _positive(conv):
    def parse(text):
        value = conv(text)
        if not value > 0:
            raise ValueError(f"must be positive, got {text!r}")
        return value

    return parse


def _unit_interval(text):
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise ValueError(f"must lie in (0, 1], got {text!r}")
    return value


def _open_unit(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise ValueError(f"must lie in (0, 1), got {text!r}")
    return value


def _non_negative(text):
    value = float(text)
    if value < 0:
        raise ValueError(f"must be non-negative, got {text!r}")
    return value


GLOBAL_KEYS = {
    "scenario": _choice(SCENARIOS),
    "tau": _positive(_int),
    "program": _choice(PROGRAMS),
    "policy": _choice(SIM_POLICIES),
    "periods": _positive(_int),
    "seeds": _seeds,
    "bid_interval": _positive(_int),
    "alpha": _open_unit,
    "max_iters": _positive(_int),
    "fp_tol": _non_negative,
    "backend": _choice(BACKENDS),
    "subset_limit": _positive(_int),
    "solver_tol": _positive(float),
    "sim_tol": _positive(float),
}
CLIENT_KEYS = {
    "p": _unit_interval,
    "bid": _positive(float),
    "utility": _utility,
    "a": _positive(float),
    "b": _non_negative,
    "key": float,
}


def parse_config(text: str) -> ExperimentConfig:
    errors: list[tuple[int, str]] = []
    settings: dict = {}
    clients: dict[int, dict] = {}
    client_lines: dict[int, int] = {}
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            name = line.strip("[]").strip()
            if not line.endswith("]") or not name.startswith("client."):
                errors.append((ln, f"unknown section {line!r}"))
                section = "bad"
                continue
            try:
                cid = int(name[len("client."):])
            except ValueError:
                errors.append((ln, f"client id must be an integer in {line!r}"))
                section = "bad"
                continue
            if cid in clients:
                errors.append((ln, f"duplicate section [client.{cid}]"))
            clients[cid] = {}
            client_lines[cid] = ln
            section = cid
            continue
        if "=" not in line:
            errors.append((ln, f"expected 'key = value', got {line!r}"))
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        table, target = (GLOBAL_KEYS, settings) if section is None else (CLIENT_KEYS, clients.get(section))
        if section == "bad":
            continue
        if key not in table:
            errors.append((ln, f"unknown key {key!r}"))
            continue
        if key in target:
            errors.append((ln, f"duplicate key {key!r}"))
            continue
        try:
            target[key] = table[key](value)
        except ValueError as exc:
            errors.append((ln, f"{key}: {exc}"))
            target[key] = None  # seen, but invalid

    ids = sorted(clients)
    if ids != list(range(1, len(ids) + 1)):
        errors.append((client_lines[ids[-1]] if ids else 0, f"client ids must be 1..N, got {ids}"))
    entries = []
    for cid in ids:
        if "p" not in clients[cid]:
            errors.append((client_lines[cid], f"[client.{cid}] is missing required key 'p'"))
            continue
        if None not in clients[cid].values():
            entries.append(ClientEntry(id=cid, **clients[cid]))
    scenario = settings.get("scenario")
    if scenario is None:
        errors.append((0, "missing required key 'scenario'"))
    elif scenario != "replicate-paper" and not clients:
        errors.append((0, f"scenario {scenario!r} needs at least one [client.<id>] section"))
    if errors:
        raise ConfigError(sorted(errors))
    return ExperimentConfig(clients=tuple(entries), **settings)


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return " ".join(str(v) if isinstance(v, str) else repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(emit_config(c)) == c``."""
    lines = []
    for key in GLOBAL_KEYS:
        value = getattr(cfg, key)
        if key == "seeds":
            value = ", ".join(str(s) for s in value)
        lines.append(f"{key} = {_fmt(value)}")
    for c in cfg.clients:
        lines.append("")
        lines.append(f"[client.{c.id}]")
        for key in CLIENT_KEYS:
            value = getattr(c, key)
            if value is None or value == ():
                continue
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def build_utility(spec: tuple):
    if not spec:
        return None
    if spec[0] == "log":
        return LogUtility(spec[1])
    return PowerUtility(spec[1], spec[2])


def system_config(cfg: ExperimentConfig) -> SystemConfig:
    clients = tuple(
        ClientSpec(id=c.id, p=c.p, utility=build_utility(c.utility), initial_bid=c.bid) for c in cfg.clients
    )
    return SystemConfig(cfg.tau, clients, cfg.subset_limit, cfg.solver_tol, cfg.sim_tol)


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    seed: int | None  # None: not seed-specific
    client: int | None  # None: aggregate over clients
    metric: str
    value: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")


FIELDS = ("scenario", "seed", "client", "metric", "value")
AGGREGATE = "all"


def _sort_key(row: ResultRow):
    return (
        row.scenario,
        -1 if row.seed is None else row.seed,
        -1 if row.client is None else row.client,
        row.metric,
    )


def _cell(value) -> str:
    return AGGREGATE if value is None else str(value)


def _number(value) -> str:
    return format(float(value), ".12g")


def render_results(rows, fmt: str = "csv") -> str:
    rows = sorted(rows, key=_sort_key)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(FIELDS)
        for r in rows:
            writer.writerow([r.scenario, _cell(r.seed), _cell(r.client), r.metric, _number(r.value)])
        return buf.getvalue()
    if fmt == "json":
        records = [
            {"scenario": r.scenario, "seed": _cell(r.seed), "client": _cell(r.client), "metric": r.metric, "value": float(_number(r.value))}
            for r in rows
        ]
        return json.dumps(records, indent=1) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_results(rows, fmt: str = "csv", out=None) -> None:
    """Write rows as CSV or JSON to ``out`` (a path, a file object, or stdout)."""
    text = render_results(rows, fmt)
    if out is None or out == "-":
        sys.stdout.write(text)
    elif hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _uncell(text: str) -> int | None:
    return None if text == AGGREGATE else int(text)


def parse_results(text: str, fmt: str = "csv") -> list[ResultRow]:
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if tuple(header or ()) != FIELDS:
            raise ValueError(f"bad CSV header {header}")
        records = [dict(zip(FIELDS, rec)) for rec in reader]
    elif fmt == "json":
        records = json.loads(text)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return [
        ResultRow(r["scenario"], _uncell(str(r["seed"])), _uncell(str(r["client"])), r["metric"], float(r["value"]))
        for r in records
    ]


def _client_rows(scenario, seed, metric, values):
    return [ResultRow(scenario, seed, i + 1, metric, float(v)) for i, v in enumerate(values)]


def run_solve(cfg: ExperimentConfig) -> list[ResultRow]:
    sys_cfg = system_config(cfg)
    tag = f"solve:{cfg.program}"
    if cfg.program == "access-point":
        rho = sys_cfg.initial_bids
        q, cert = solve_access_point(rho, sys_cfg)
        decomposition, _ = analytic_policy_limit(PolicyParams.weighted_transmission(rho), sys_cfg)
        report = verify_kkt_access_point(q, cert, rho, sys_cfg)
        thetas = [decomposition.thetas[decomposition.level_of(c.id)] for c in sys_cfg.clients]
        rows = _client_rows(tag, None, "q", q) + _client_rows(tag, None, "theta", thetas)
        rows += [
            ResultRow(tag, None, None, "objective", access_point_objective(q, rho)),
            ResultRow(tag, None, None, "levels", len(decomposition.levels)),
        ]
    else:
        q, cert = solve_system(sys_cfg, tol=cfg.solver_tol)
        report = verify_kkt_system(q, cert, sys_cfg)
        rows = _client_rows(tag, None, "q", q)
        rows.append(ResultRow(tag, None, None, "total_utility", total_utility(q, sys_cfg.utilities)))
    rows += _client_rows(tag, None, "multiplier_load", cert.load(sys_cfg.n))
    rows += [
        ResultRow(tag, None, None, "kkt_passed", float(report.passed)),
        ResultRow(tag, None, None, "kkt_stationarity", report.stationarity),
    ]
    return rows


def _policy(cfg: ExperimentConfig, sys_cfg: SystemConfig):
    if cfg.policy == "wt":
        return WeightedTransmission(sys_cfg.initial_bids)
    if cfg.policy == "rand":
        return RandomPriority()
    if cfg.policy == "gtt":
        missing = [c.id for c in cfg.clients if c.a is None or c.b is None]
        if missing:
            raise ValueError(f"policy gtt needs a and b for clients {missing}")
        return GeneralizedTT([c.a for c in cfg.clients], [c.b for c in cfg.clients])
    missing = [c.id for c in cfg.clients if c.key is None]
    if missing:
        raise ValueError(f"policy p-rand needs key for clients {missing}")
    return PriorityRandom([c.key for c in cfg.clients])


def run_simulate(cfg: ExperimentConfig) -> list[ResultRow]:
    sys_cfg = system_config(cfg)
    policy = _policy(cfg, sys_cfg)
    tag = f"simulate:{cfg.policy}"
    rows = []
    for seed in cfg.seeds:
        if cfg.policy in ("wt", "gtt"):
            comparison = empirical_vs_analytic(policy, sys_cfg, cfg.periods, RngSpec(seed))
            rows += _client_rows(tag, seed, "analytic_q", comparison.analytic_q)
            rows += [
                ResultRow(tag, seed, None, "max_gap", comparison.max_gap),
                ResultRow(tag, seed, None, "within_tol", float(comparison.within_tol)),
            ]
        stats = run_simulation(policy, sys_cfg, cfg.periods, RngSpec(seed))
        rows += _client_rows(tag, seed, "q", stats.empirical_q)
        rows += _client_rows(tag, seed, "u", stats.u)
        rows += _client_rows(tag, seed, "deliveries", stats.deliveries)
        rows += [
            ResultRow(tag, seed, None, "idle_slots", stats.idle_slots),
            ResultRow(tag, seed, None, "periods", stats.periods_elapsed),
        ]
    return rows


def run_bid(cfg: ExperimentConfig) -> list[ResultRow]:
    sys_cfg = system_config(cfg)
    tag = f"bid:{cfg.backend}"
    seeds = cfg.seeds if cfg.backend == "simulation" else (None,)
    rows = []
    for seed in seeds:
        backend = "analytic" if seed is None else SimulationBackend(cfg.bid_interval, RngSpec(seed))
        trace = run_bidding_game(sys_cfg, cfg.alpha, cfg.max_iters, cfg.fp_tol, backend)
        final = trace.final
        rows += _client_rows(tag, seed, "rho", final.rho)
        rows += _client_rows(tag, seed, "q", final.q)
        rows += _client_rows(tag, seed, "psi", final.psi)
        rows += [
            ResultRow(tag, seed, None, "iterations", len(trace.states)),
            ResultRow(tag, seed, None, "converged", float(trace.converged)),
            ResultRow(tag, seed, None, "residual", trace.residuals[-1]),
            ResultRow(tag, seed, None, "total_utility", final.total_utility),
        ]
    return rows


def run_replicate(cfg: ExperimentConfig, periods: int = 3000, short: int = 10, long: int = 500) -> list[ResultRow]:
    paper = paper_config()
    summary = replicate_paper_experiment(cfg.seeds, periods=periods, bid_interval=cfg.bid_interval, cfg=paper)
    rows = []
    for run in summary.runs:
        rows.append(ResultRow(f"replicate-paper:{run.policy}", run.seed, None, "total_utility", run.total_utility))
    for policy in POLICIES:
        tag = f"replicate-paper:{policy}"
        rows.append(ResultRow(tag, None, None, "mean_total_utility", summary.mean(policy)))
        rows.append(ResultRow(tag, None, None, "var_total_utility", summary.variance(policy)))
    tag = "replicate-paper:convergence"
    for seed in cfg.seeds:
        values = log_utility_trajectory(paper, seed, (short, long))
        rows += [
            ResultRow(tag, seed, None, "log_objective_short", values[short]),
            ResultRow(tag, seed, None, "log_objective_long", values[long]),
            ResultRow(tag, seed, None, "relative_gap", abs(values[short] - values[long]) / abs(values[long])),
        ]
    return rows


def run_scenario(cfg: ExperimentConfig) -> list[ResultRow]:
    if cfg.scenario == "solve":
        return run_solve(cfg)
    if cfg.scenario == "simulate":
        return run_simulate(cfg)
    if cfg.scenario == "bid":
        return run_bid(cfg)
    return run_replicate(cfg, periods=cfg.periods)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delayqos", description="Delay-constrained wireless QoS: solve, simulate, bid.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="structured-text config file")
        cmd.add_argument("--seed", type=int, help="single seed (overrides the config)")
        cmd.add_argument("--seeds", help="seed list '0,1,2' or range '0:20' (overrides the config)")
        cmd.add_argument("--periods", type=int, help="periods per run (overrides the config)")
        cmd.add_argument("--tol", type=float, help="solver tolerance (solve) or fixed-point tolerance (bid)")
        cmd.add_argument("--out", default="-", help="output path, '-' for stdout")
        cmd.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def load_config(args) -> ExperimentConfig:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
        if cfg.scenario != args.command:
            raise ConfigError([(0, f"config is for scenario {cfg.scenario!r}, not {args.command!r}")])
    elif args.command == "replicate-paper":
        cfg = ExperimentConfig(scenario="replicate-paper", tau=32, periods=3000, seeds=tuple(range(20)))
    else:
        raise ConfigError([(0, f"scenario {args.command!r} needs --config")])
    updates = {}
    if args.seeds is not None:
        try:
            updates["seeds"] = _seeds(args.seeds)
        except ValueError as exc:
            raise ConfigError([(0, f"--seeds: {exc}")]) from None
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
    if args.periods is not None:
        if args.periods < 1:
            raise ConfigError([(0, "--periods must be positive")])
        updates["periods"] = args.periods
    if args.tol is not None:
        updates["solver_tol" if args.command == "solve" else "fp_tol"] = args.tol
    return replace(cfg, **updates)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        rows = run_scenario(cfg)
        emit_results(rows, args.format, args.out)
    except ConfigError as exc:
        error = {"error": "ConfigError", "message": str(exc), "errors": [{"line": ln, "message": m} for ln, m in exc.errors]}
        sys.stderr.write(json.dumps(error) + "\n")
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
