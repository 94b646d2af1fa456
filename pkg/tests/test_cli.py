import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delayqos.cli import (
    METRICS,
    ConfigError,
    ExperimentConfig,
    ClientEntry,
    ResultRow,
    emit_config,
    emit_results,
    main,
    parse_config,
    parse_results,
    render_results,
)

AP_CONFIG = """
scenario = solve
tau = 1
[client.1]
p = 1
bid = 3
[client.2]
p = 1
bid = 1
"""


def test_minimal_config_parses():
    cfg = parse_config("scenario = solve\ntau = 1\n[client.1]\np = 1\n")
    assert cfg.tau == 1 and cfg.clients == (ClientEntry(1, 1.0),)


def test_range_error_is_line_anchored():
    with pytest.raises(ConfigError) as err:
        parse_config("scenario = solve\ntau = 2\n\n[client.1]\np = 1.5\n")
    assert err.value.errors == [(5, "p: must lie in (0, 1], got '1.5'")]


def test_unknown_keys_and_missing_fields():
    text = "scenario = bid\ntau = 2\nspeed = 3\n[client.1]\nbid = 1\n[client.3]\np = 0.5\n[server]\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    lines = [ln for ln, _ in err.value.errors]
    assert 3 in lines and 4 in lines and 8 in lines
    assert any("1..N" in m for _, m in err.value.errors)
    with pytest.raises(ConfigError):
        parse_config("tau = 2\n[client.1]\np = 0.5\n")


def test_seed_ranges():
    assert parse_config("scenario = replicate-paper\nseeds = 3:6\n").seeds == (3, 4, 5)
    assert parse_config("scenario = replicate-paper\nseeds = 1, 7\n").seeds == (1, 7)


def test_emit_parse_round_trip_normalizes():
    text = "# comment\nscenario=solve\ntau = 1   \n[client.1]\np=1\nbid = 3\n[client.2]\np = 1\n"
    cfg = parse_config(text)
    normal = emit_config(cfg)
    assert parse_config(normal) == cfg
    assert emit_config(parse_config(normal)) == normal


entries = st.builds(
    lambda p, bid, u: (p, bid, u),
    st.floats(0.01, 1.0),
    st.floats(0.01, 100.0),
    st.one_of(st.just(()), st.builds(lambda w: ("log", w), st.floats(0.1, 5)), st.builds(lambda g, a: ("power", g, a), st.floats(0.1, 5), st.floats(0.05, 0.95))),
)


@settings(max_examples=50, deadline=None)
@given(
    scenario=st.sampled_from(["solve", "simulate", "bid"]),
    tau=st.integers(1, 64),
    clients=st.lists(entries, min_size=1, max_size=5),
    seeds=st.lists(st.integers(0, 10**6), min_size=1, max_size=4),
    alpha=st.floats(0.01, 0.99),
    fp_tol=st.floats(0, 1e-3),
)
def test_round_trip_property(scenario, tau, clients, seeds, alpha, fp_tol):
    cfg = ExperimentConfig(
        scenario=scenario,
        tau=tau,
        clients=tuple(ClientEntry(i + 1, p, bid, u) for i, (p, bid, u) in enumerate(clients)),
        seeds=tuple(seeds),
        alpha=alpha,
        fp_tol=fp_tol,
    )
    assert parse_config(emit_config(cfg)) == cfg


def test_empty_and_single_row_csv():
    assert render_results([]) == "scenario,seed,client,metric,value\n"
    one = render_results([ResultRow("solve:access-point", None, 1, "q", 0.75)])
    assert one == "scenario,seed,client,metric,value\nsolve:access-point,all,1,q,0.75\n"
    assert render_results([ResultRow("solve:access-point", None, 1, "q", 0.75)]) == one


def test_rows_are_sorted_and_rounded():
    rows = [
        ResultRow("b", 2, None, "q", 1 / 3),
        ResultRow("b", 1, 2, "rho", 2.0),
        ResultRow("a", None, None, "levels", 1),
        ResultRow("b", 1, None, "q", 1.0),
    ]
    lines = render_results(rows).splitlines()[1:]
    assert lines == ["a,all,all,levels,1", "b,1,all,q,1", "b,1,2,rho,2", "b,2,all,q,0.333333333333"]


def test_unknown_metric_rejected():
    with pytest.raises(ValueError):
        ResultRow("x", 0, 1, "goodput", 1.0)


rows = st.lists(
    st.builds(
        ResultRow,
        st.sampled_from(["solve:system", "bid:analytic", "replicate-paper:Rand"]),
        st.one_of(st.none(), st.integers(0, 100)),
        st.one_of(st.none(), st.integers(1, 30)),
        st.sampled_from(sorted(METRICS)),
        st.floats(-1e6, 1e6, allow_nan=False),
    ),
    max_size=20,
)


@settings(max_examples=50, deadline=None)
@given(rows=rows)
def test_csv_json_equivalence(rows):
    from_csv = parse_results(render_results(rows, "csv"), "csv")
    from_json = parse_results(render_results(from_csv, "json"), "json")
    assert from_csv == from_json
    assert render_results(from_json, "csv") == render_results(rows, "csv")


def test_emit_to_path(tmp_path):
    path = tmp_path / "out.json"
    emit_results([ResultRow("s", 0, 1, "q", 0.5)], "json", str(path))
    assert json.loads(path.read_text())[0]["value"] == 0.5
    with pytest.raises(OSError):
        emit_results([], "csv", str(tmp_path / "missing" / "out.csv"))


def run_cli(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_verb(tmp_path, capsys):
    cfg = tmp_path / "ap.cfg"
    cfg.write_text(AP_CONFIG)
    code, out, _ = run_cli(["solve", "--config", str(cfg)], capsys)
    assert code == 0
    assert "solve:access-point,all,1,q,0.75" in out
    assert "solve:access-point,all,all,kkt_passed,1" in out


def test_system_and_bid_verbs(tmp_path, capsys):
    cfg = tmp_path / "sys.cfg"
    cfg.write_text(AP_CONFIG.replace("scenario = solve", "scenario = solve\nprogram = system").replace("bid = 3", "utility = log 2").replace("bid = 1", "utility = log"))
    code, out, _ = run_cli(["solve", "--config", str(cfg), "--format", "json"], capsys)
    q = {r["client"]: r["value"] for r in json.loads(out) if r["metric"] == "q"}
    assert code == 0 and q["1"] == pytest.approx(2 / 3, abs=1e-9)
    cfg.write_text(cfg.read_text().replace("scenario = solve", "scenario = bid"))
    code, out, _ = run_cli(["bid", "--config", str(cfg)], capsys)
    assert code == 0 and "bid:analytic,all,all,converged,1" in out


def test_simulate_verb_with_seed_override(tmp_path, capsys):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(AP_CONFIG.replace("scenario = solve", "scenario = simulate\nperiods = 400"))
    code, out, _ = run_cli(["simulate", "--config", str(cfg), "--seeds", "0,5"], capsys)
    assert code == 0
    assert "simulate:wt,5,1,q,0.75" in out and "simulate:wt,0,all,max_gap,0" in out


def test_errors_are_json_on_stderr(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("scenario = simulate\ntau = 0\n[client.1]\np = 1\n")
    code, out, err = run_cli(["simulate", "--config", str(bad)], capsys)
    payload = json.loads(err)
    assert code != 0 and out == ""
    assert payload["error"] == "ConfigError" and payload["errors"][0]["line"] == 2
    code, _, err = run_cli(["solve"], capsys)
    assert code != 0 and "needs --config" in json.loads(err)["message"]
    code, _, err = run_cli(["solve", "--config", str(tmp_path / "nope.cfg")], capsys)
    assert code != 0 and json.loads(err)["error"] == "FileNotFoundError"
