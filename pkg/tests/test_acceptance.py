"""Acceptance checks. Every test prints a single PASS or FAIL line.

The network experiments are slow (several minutes on one core); they share
session fixtures so each sweep runs once.
"""

import time

import numpy as np
import pytest

import test_engine
import test_plasticity
import test_routing
from plasticflow import scenarios
from plasticflow.analysis import (
    PARAMETER_SETS,
    overshoot_aimd,
    overshoot_aisd,
    overshoot_mimd,
    overshoot_misd,
    rule_for_set,
    two_flow_oracle,
)
from plasticflow.config import parse_config_text
from plasticflow.metrics import welch_less
from plasticflow.plasticity import UpdateRule
from plasticflow.topology import graph_stats, load_caida

RULES = ("aimd", "aisd", "mimd", "misd", "oja")

GRID_SWEEP = """\
topology = uniform
num_routers = 100
router_degree = 6
capacity = 100
load_multiplier = 100
repeats = 25
grid = full
rule = aimd, aisd, mimd, misd, oja
"""

RUSH = """\
topology = scale_free
num_routers = 1000
attach_m = 3
capacity = 100
load_multiplier = 10000
num_flows = 200
rush_flows = 200
rush_start = 1000
rush_end = 2000
max_steps = 3000
repeats = 10
series_bin = 100
rule = aimd, aisd, mimd, misd, oja
"""
ONSET, STEADY = 1000, (1500, 2000)


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return emit


def test_analytic_overshoot_formulas(verdict):
    start = time.perf_counter()
    got = {
        "aimd balanced": overshoot_aimd(1000, 1.0, 0.5, 250),
        "aimd aggressive_increase": overshoot_aimd(1000, 100.0, 0.5, 3),
        "aisd balanced": overshoot_aisd(1000, 1.0, 5.0, 5),
        "aisd aggressive_decrease": overshoot_aisd(1000, 1.0, 100.0, 100),
        "mimd balanced": overshoot_mimd(1000, 1.1, 0.5, 8),
        "mimd aggressive_increase": overshoot_mimd(1000, 1.5, 0.5, 2),
        "misd balanced": overshoot_misd(1000, 1.1, 5.0, 1),
        "misd aggressive_increase": overshoot_misd(1000, 1.5, 5.0, 1),
    }
    # independent evaluation of the closed forms
    want = {
        "aimd balanced": 2 * 250 * 1.0 + 1000 * (0.5 - 1),
        "aimd aggressive_increase": 2 * 3 * 100.0 + 1000 * (0.5 - 1),
        "aisd balanced": 2 * (5 * 1.0 - 5.0),
        "aisd aggressive_decrease": 2 * (100 * 1.0 - 100.0),
        "mimd balanced": 1000 * (0.5 * 1.1**8 - 1),
        "mimd aggressive_increase": 1000 * (0.5 * 1.5**2 - 1),
        "misd balanced": 1000 * (1.1**1 - 1),
        "misd aggressive_increase": 1000 * (1.5**1 - 1),
    }
    elapsed = time.perf_counter() - start
    exact = all(got[k] == want[k] for k in want)
    quoted = (
        got["aimd balanced"] == 0.0 and got["aimd aggressive_increase"] == 100.0
        and round(got["mimd balanced"], 2) == 71.79 and got["mimd aggressive_increase"] == 125.0
        and got["aisd balanced"] == 0.0 and got["misd balanced"] == pytest.approx(100.0)
        and got["misd aggressive_increase"] == 500.0
    )
    detail = ", ".join(f"{k}={v:.4g}" for k, v in got.items()) + f"; {elapsed:.3f}s"
    verdict("analytic overshoot formulas", exact and quoted and elapsed < 1.0, detail)


def test_two_flow_oracle(verdict):
    start = time.perf_counter()
    oja = [two_flow_oracle(rule_for_set("oja", s), 1000) for s in PARAMETER_SETS]
    bal = {k: two_flow_oracle(rule_for_set(k, "balanced"), 1000) for k in ("aimd", "aisd", "mimd", "misd")}
    elapsed = time.perf_counter() - start
    checks = {
        "oja never congests": all(r.never and r.overshoot < 0 for r in oja),
        "aimd < mimd < misd": bal["aimd"].overshoot < bal["mimd"].overshoot < bal["misd"].overshoot,
        "aisd <= 2": bal["aisd"].overshoot <= 2,
        "aimd <= 2": bal["aimd"].overshoot <= 2,
        "aimd n near 250": bal["aimd"].n is not None and abs(bal["aimd"].n - 250) <= 25,
        "runtime": elapsed < 10.0,
    }
    detail = ", ".join(f"{k} {r.overshoot:g} (n={r.n})" for k, r in bal.items())
    detail += f", oja {[r.overshoot for r in oja]}; failed: {[k for k, v in checks.items() if not v]}"
    verdict("two-flow oracle", all(checks.values()), f"{detail}; {elapsed:.2f}s")


def test_capacity_sensitivity(verdict):
    start = time.perf_counter()
    aimd = UpdateRule("aimd", 1.0, 0.5)
    small, large = two_flow_oracle(aimd, 50), two_flow_oracle(aimd, 1000)
    elapsed = time.perf_counter() - start
    ok = small.overshoot > large.overshoot and elapsed < 5.0
    verdict("capacity sensitivity", ok, f"C=50 {small.overshoot:g}, C=1000 {large.overshoot:g}; {elapsed:.2f}s")


@pytest.fixture(scope="session")
def grid_sweeps(tmp_path_factory):
    """Per-rule mean penalty over the full grid, for both congestion models."""
    out = tmp_path_factory.mktemp("sweep")
    start = time.perf_counter()
    data = {}
    for model in ("drop", "queue"):
        config = parse_config_text(GRID_SWEEP + f"model = {model}\n")
        rows = scenarios.aggregate(
            scenarios.run_experiment(config, scenarios.sweep_rules(config), False), config.seed
        )
        scenarios.write_csv(out / f"summary_{model}.csv", scenarios.SUMMARY_HEADER, (r.values() for r in rows))
        data[model] = rows
    return data, out, time.perf_counter() - start


def mean_penalty(rows, penalty):
    return {k: float(np.mean([getattr(r, penalty) for r in rows if r.rule == k])) for k in RULES}


def ordered(m):
    return m["aimd"] < min(m["oja"], m["mimd"]) and max(m["oja"], m["mimd"]) < m["aisd"] < m["misd"]


@pytest.mark.slow
def test_grid_sweep_ordering(verdict, grid_sweeps):
    data, _, elapsed = grid_sweeps
    drop = mean_penalty(data["drop"], "drop_pct")
    queue = mean_penalty(data["queue"], "queue_pct")
    ratio = drop["aisd"] / drop["aimd"]
    checks = {
        "drop ordering": ordered(drop),
        "aisd/aimd >= 5": ratio >= 5,
        "queue ordering": ordered(queue),
        "runtime": elapsed < 600,
    }
    fmt = lambda m: " ".join(f"{k}={v:.2f}" for k, v in m.items())
    detail = (
        f"drop% {fmt(drop)}; queue% {fmt(queue)}; ratio {ratio:.2f}; {elapsed:.0f}s; "
        f"failed: {[k for k, v in checks.items() if not v]}"
    )
    verdict("grid sweep ordering", all(checks.values()), detail)


@pytest.fixture(scope="session")
def rush_runs(grid_sweeps):
    _, out, _ = grid_sweeps
    config = parse_config_text(RUSH + f"params_from = {out / 'summary_drop.csv'}\n")
    rules = scenarios.selected_rules(config)
    start = time.perf_counter()
    results = scenarios.run_experiment(config, rules, keep_series=True)
    elapsed = time.perf_counter() - start
    by_rule = {rule.kind.value: [r for r in results if r.rule == rule] for rule in rules}
    return config, rules, by_rule, elapsed


@pytest.mark.slow
def test_rush_hour(verdict, rush_runs):
    config, rules, runs, elapsed = rush_runs
    width = config.series_bin
    transient = {k: [scenarios.transient_drop(r, ONSET, width) for r in v] for k, v in runs.items()}
    steady = {k: float(np.mean([scenarios.window_bandwidth(r, *STEADY, width) for r in v])) for k, v in runs.items()}
    pvals = {k: welch_less(transient["aimd"], transient[k]) for k in ("aisd", "misd", "oja")}
    gaps = {
        f"{a}/{b}": abs(steady[a] - steady[b]) / steady[b]
        for a in ("aimd", "mimd") for b in ("aisd", "misd")
    }
    checks = {
        "transient p < 0.05": all(p < 0.05 for p in pvals.values()),
        "bandwidth within 10%": all(g <= 0.10 for g in gaps.values()),
        "runtime": elapsed < 900,
    }
    detail = (
        "params " + " ".join(f"{r.kind.value}({r.ki:g},{r.kd:g})" for r in rules)
        + "; transient% " + " ".join(f"{k}={np.mean(v):.2f}" for k, v in transient.items())
        + "; p " + " ".join(f"{k}={p:.2g}" for k, p in pvals.items())
        + "; bandwidth gaps " + " ".join(f"{k}={g:.1%}" for k, g in gaps.items())
        + f"; {elapsed:.0f}s; failed: {[k for k, v in checks.items() if not v]}"
    )
    verdict("rush hour", all(checks.values()), detail)


PROPERTIES = [
    test_plasticity.test_output_in_range,
    test_plasticity.test_maxsend_is_constant,
    test_plasticity.test_bangbang_extremes,
    test_plasticity.test_oja_ltp_damping,
    test_plasticity.test_oja_zero_increment_at_balance,
    test_engine.test_step_invariants,
    test_engine.test_only_one_penalty_is_nonzero,
    test_routing.test_path_length_matches_exhaustive_search,
]


def test_property_suite(verdict, tmp_path):
    failed = []
    for prop in PROPERTIES:
        try:
            prop()
        except Exception as exc:  # report every failing property, not just the first
            failed.append(f"{prop.__name__}: {type(exc).__name__}")
    base = parse_config_text(
        "topology = uniform\nnum_routers = 20\nrouter_degree = 4\ncapacity = 20\n"
        "repeats = 3\nrule = aimd\nki = 2\nkd = 0.5\nmodel = queue\n"
    )
    for name in ("a", "b"):
        (tmp_path / name).mkdir()
        scenarios.simulate(base, tmp_path / name)
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    if any((tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes() for f in files):
        failed.append("csv determinism")
    names = [p.__name__ for p in PROPERTIES] + ["csv determinism"]
    verdict("property suite", not failed, f"{len(names) - len(failed)}/{len(names)} hold; failed: {failed}")


CAIDA_FIXTURE = """\
# synthetic AS relationships: provider|customer|-1, peer|peer|0
100|200|-1
100|300|-1
200|300|0
300|100|-1
400|500|0
500|600|-1|extra
600|100|0
"""


def test_caida_loader_counts(verdict, tmp_path):
    path = tmp_path / "as-rel.txt"
    path.write_text(CAIDA_FIXTURE)
    graph = load_caida(path, 500, 500, seed=0)
    stats = graph_stats(graph)
    # 6 ASes; 6 distinct undirected links once 300|100 folds into 100|300
    want = {"routers": 6, "sources": 500, "targets": 500, "directed_router_edges": 12, "directed_edges": 1012}
    got = {k: stats[k] for k in want}
    verdict("caida loader", got == want, f"{got}")
