"""Experiment orchestration: repeats, sweeps, rush hour, CSV output.

Seeding: repeat ``r`` of a run with master seed ``s`` draws three
sub-seeds (topology, flow placement, engine) from
``SeedSequence(s, spawn_key=(r,))``. Every sweep point of a repeat shares
them, so points are compared on the same graph and the same flows.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from plasticflow import metrics
from plasticflow.config import RunConfig
from plasticflow.engine import Engine, FlowSpec
from plasticflow.errors import ConfigurationError, MetricError
from plasticflow.plasticity import RuleKind, UpdateRule
from plasticflow.topology import (
    NetworkGraph,
    attach_endpoints,
    build_scale_free_topology,
    build_uniform_topology,
    load_caida_router_core,
)

SUMMARY_HEADER = ("rule", "ki", "kd", "seed", "bandwidth", "drop_pct", "queue_pct")
SERIES_HEADER = ("t_bin", "bandwidth", "drop_pct", "queue_pct")
WEIGHTS_HEADER = ("t_bin", "mean_w", "stderr_w")
OVERSHOOT_HEADER = ("rule", "parameter_set", "ki", "kd", "analytic", "simulated", "n")


@dataclass(frozen=True)
class RepeatSeeds:
    topology: int
    flows: int
    engine: int


def repeat_seeds(master: int, repeat: int) -> RepeatSeeds:
    state = np.random.SeedSequence(master, spawn_key=(repeat,)).generate_state(3)
    return RepeatSeeds(*(int(v) for v in state))


@functools.lru_cache(maxsize=4)
def _caida_core(path: str, capacity: int) -> NetworkGraph:
    return load_caida_router_core(path, capacity)


@functools.lru_cache(maxsize=8)
def _topology(key: tuple, seed: int) -> NetworkGraph:
    kind, routers, degree, m, path, ns, nt, capacity = key
    if kind == "uniform":
        return build_uniform_topology(routers, degree, ns, nt, seed=seed, capacity=capacity)
    if kind == "scale_free":
        return build_scale_free_topology(routers, m, ns, nt, seed=seed, capacity=capacity)
    if kind == "caida":
        return attach_endpoints(_caida_core(path, capacity), ns, nt, seed=seed)
    raise ConfigurationError(f"unknown topology {kind!r}")


def build_topology(config: RunConfig, seed: int) -> NetworkGraph:
    key = (
        config.topology, config.num_routers, config.router_degree, config.attach_m,
        config.caida_path, config.sources, config.targets, config.capacity,
    )
    return _topology(key, seed)


def make_flows(
    graph: NetworkGraph,
    count: int,
    load: int,
    rng: np.random.Generator,
    exclude: Iterable[int] = (),
    start: int = 0,
    end: int | None = None,
) -> list[FlowSpec]:
    """``count`` flows from distinct sources (while they last) to random targets."""
    excluded = set(int(s) for s in exclude)
    free = np.array([s for s in graph.sources if int(s) not in excluded], dtype=np.int64)
    if count <= len(free):
        sources = rng.permutation(free)[:count]
    else:
        sources = rng.choice(graph.sources, size=count)
    targets = rng.choice(graph.targets, size=count)
    return [FlowSpec(int(s), int(t), load, start, end) for s, t in zip(sources, targets)]


@dataclass
class RepeatResult:
    rule: UpdateRule
    repeat: int
    bandwidth: float
    drop_pct: float
    queue_pct: float
    steps: int
    series: dict[str, np.ndarray] | None = None
    weights: np.ndarray | None = None


def _scheduled(config: RunConfig) -> bool:
    return config.schedule_window is not None


def _engine_for(config: RunConfig, rule: UpdateRule, repeat: int) -> Engine:
    seeds = repeat_seeds(config.seed, repeat)
    graph = build_topology(config, seeds.topology)
    rng = np.random.default_rng(seeds.flows)
    base = make_flows(graph, config.flows, config.load, rng)
    engine = Engine(graph, base, rule, config.model, seed=seeds.engine)
    if _scheduled(config):
        start, end = config.schedule_window
        rush = make_flows(graph, config.rush_flows, config.load, rng, exclude=[f.source for f in base])
        engine.apply_traffic_schedule([(start, end, rush)])
    return engine


def _unit_percent(report: metrics.RunReport, field: str) -> float:
    injected = report.series["injected"].sum()
    return float(100.0 * report.series[field].sum() / injected) if injected > 0 else 0.0


def run_repeat(config: RunConfig, rule: UpdateRule, repeat: int, keep_series: bool = False) -> RepeatResult:
    """One simulation. Horizon is ``max_steps``.

    Plain runs report the per-flow objectives. Scheduled (rush hour) runs
    use persistent flows, so they report unit totals instead: mean binned
    bandwidth and dropped / queued units as a percentage of injected units.
    """
    engine = _engine_for(config, rule, repeat)
    report = engine.run(config.max_steps)
    if _scheduled(config):
        bw = metrics.binned_series(report, config.series_bin, "bandwidth")
        bandwidth = float(np.nanmean(bw)) if np.isfinite(bw).any() else math.nan
        drop, queue = _unit_percent(report, "dropped"), _unit_percent(report, "queued")
    else:
        try:
            bandwidth = metrics.bandwidth(report)
        except MetricError:
            bandwidth = math.nan
        drop, queue = metrics.drop_penalty(report), metrics.queue_penalty(report)
    result = RepeatResult(rule, repeat, bandwidth, drop, queue, report.steps)
    if keep_series:
        result.series = {
            q: metrics.binned_series(report, config.series_bin, q)
            for q in ("bandwidth", "drop_pct", "queue_pct")
        }
        result.weights = metrics.binned_series(report, config.weight_bin, "source_weight")
    return result


def _task(args) -> RepeatResult:
    return run_repeat(*args)


def run_tasks(tasks: Sequence[tuple], workers: int = 1) -> list[RepeatResult]:
    """Run ``(config, rule, repeat, keep_series)`` tasks; results in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


@dataclass(frozen=True)
class SummaryRow:
    rule: str
    ki: float
    kd: float
    seed: int
    bandwidth: float
    drop_pct: float
    queue_pct: float

    def values(self) -> tuple:
        return (self.rule, self.ki, self.kd, self.seed, self.bandwidth, self.drop_pct, self.queue_pct)


def _row(rule: UpdateRule, seed: int, bandwidth, drop, queue) -> SummaryRow:
    return SummaryRow(rule.kind.value, float(rule.ki), float(rule.kd), seed, bandwidth, drop, queue)


def aggregate(results: Sequence[RepeatResult], seed: int) -> list[SummaryRow]:
    """Mean over repeats for each sweep point, in first-seen point order."""
    groups: dict[UpdateRule, list[RepeatResult]] = {}
    for r in results:
        groups.setdefault(r.rule, []).append(r)
    rows = []
    for rule, group in groups.items():
        rows.append(
            _row(
                rule, seed,
                float(np.mean([g.bandwidth for g in group])),
                float(np.mean([g.drop_pct for g in group])),
                float(np.mean([g.queue_pct for g in group])),
            )
        )
    return rows


def repeat_rows(results: Sequence[RepeatResult]) -> list[SummaryRow]:
    return [_row(r.rule, r.repeat, r.bandwidth, r.drop_pct, r.queue_pct) for r in results]


def select_best_params(
    rows: Sequence[SummaryRow], max_penalty_slack: float = 0.01, rule: str | None = None,
    penalty: str = "drop_pct",
) -> tuple[float, float]:
    """Highest-bandwidth point within ``(1 + slack)`` of the rule's minimum penalty.

    Points with undefined bandwidth (some flow never finished) are dropped
    before the minimum is taken. Ties go to the lexicographically smallest
    ``(ki, kd)``.
    """
    if rule is not None:
        rows = [r for r in rows if r.rule == RuleKind(rule).value]
    if not rows:
        raise MetricError("cannot select parameters from an empty sweep")
    if len({r.rule for r in rows}) > 1:
        raise MetricError("rows span several rules; pass rule=")
    rows = [r for r in rows if math.isfinite(r.bandwidth)]
    if not rows:
        raise MetricError("no sweep point has a defined bandwidth")
    limit = (1.0 + max_penalty_slack) * min(getattr(r, penalty) for r in rows)
    eligible = [r for r in rows if getattr(r, penalty) <= limit]
    winner = min(eligible, key=lambda r: (-r.bandwidth, r.ki, r.kd))
    return winner.ki, winner.kd


def _stack(arrays: Sequence[np.ndarray]) -> np.ndarray:
    width = max(len(a) for a in arrays)
    out = np.full((len(arrays), width), np.nan)
    for i, a in enumerate(arrays):
        out[i, : len(a)] = a
    return out


def _nanmean_columns(stacked: np.ndarray) -> np.ndarray:
    counts = np.isfinite(stacked).sum(axis=0)
    sums = np.nansum(stacked, axis=0)
    return np.divide(sums, counts, out=np.full(sums.shape, np.nan), where=counts > 0)


def mean_series(results: Sequence[RepeatResult]) -> dict[str, np.ndarray]:
    return {
        q: _nanmean_columns(_stack([r.series[q] for r in results]))
        for q in ("bandwidth", "drop_pct", "queue_pct")
    }


def weight_trace(results: Sequence[RepeatResult]) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over repeats of the binned source-edge weight."""
    stacked = _stack([r.weights for r in results])
    mean = _nanmean_columns(stacked)
    counts = np.isfinite(stacked).sum(axis=0)
    stderr = np.full(mean.shape, np.nan)
    for j in np.flatnonzero(counts > 1):
        col = stacked[:, j][np.isfinite(stacked[:, j])]
        stderr[j] = col.std(ddof=1) / math.sqrt(len(col))
    return mean, stderr


def format_value(value) -> str:
    if value is None:
        return "never"
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if value == 0:
            return "0"
        return f"{value:.6g}"
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows))
    return path


def read_summary(path) -> list[SummaryRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SUMMARY_HEADER:
            raise ConfigurationError(f"{path}: not a summary CSV")
        return [
            SummaryRow(
                r["rule"], float(r["ki"]), float(r["kd"]), int(r["seed"]),
                float(r["bandwidth"]), float(r["drop_pct"]), float(r["queue_pct"]),
            )
            for r in reader
        ]


def _series_rows(series: dict[str, np.ndarray], width: int):
    for i in range(len(series["bandwidth"])):
        yield (i * width, series["bandwidth"][i], series["drop_pct"][i], series["queue_pct"][i])


def _weight_rows(mean: np.ndarray, stderr: np.ndarray, width: int):
    for i in range(len(mean)):
        yield (i * width, mean[i], stderr[i])


def sweep_rules(config: RunConfig) -> list[UpdateRule]:
    return [rule for spec in config.sweeps() for rule in spec.rules()]


def selected_rules(config: RunConfig) -> list[UpdateRule]:
    """One rule per configured kind, parameters taken from ``params_from`` when set."""
    if config.params_from is None:
        return sweep_rules(config)
    rows = read_summary(config.params_from)
    out = []
    for kind in config.rules:
        if not kind.parametrized:
            out.append(UpdateRule(kind))
            continue
        ki, kd = select_best_params(rows, config.slack, rule=kind.value)
        out.append(UpdateRule(kind, ki, kd))
    return out


def run_experiment(
    config: RunConfig, rules: Sequence[UpdateRule], keep_series: bool
) -> list[RepeatResult]:
    tasks = [(config, rule, r, keep_series) for rule in rules for r in range(config.repeats)]
    return run_tasks(tasks, config.workers)


def _write_summaries(config: RunConfig, results, out: Path) -> list[Path]:
    return [
        write_csv(out / "summary.csv", SUMMARY_HEADER, (r.values() for r in aggregate(results, config.seed))),
        write_csv(out / "repeats.csv", SUMMARY_HEADER, (r.values() for r in repeat_rows(results))),
    ]


def _write_traces(config: RunConfig, results, out: Path, suffix: str) -> list[Path]:
    mean, stderr = weight_trace(results)
    return [
        write_csv(out / f"series{suffix}.csv", SERIES_HEADER,
                  _series_rows(mean_series(results), config.series_bin)),
        write_csv(out / f"weights{suffix}.csv", WEIGHTS_HEADER,
                  _weight_rows(mean, stderr, config.weight_bin)),
    ]


def write_simulation(
    config: RunConfig, rules: Sequence[UpdateRule], results: Sequence[RepeatResult], out: Path
) -> list[Path]:
    """Summary, per-repeat rows and binned traces per rule."""
    written = _write_summaries(config, results, out)
    for rule in rules:
        mine = [r for r in results if r.rule == rule]
        suffix = "" if len(rules) == 1 else f"_{rule.kind.value}"
        written += _write_traces(config, mine, out, suffix)
    return written


def simulate(config: RunConfig, out: Path) -> list[Path]:
    """Repeats of each configured point; summary plus binned traces per rule."""
    rules = selected_rules(config)
    return write_simulation(config, rules, run_experiment(config, rules, keep_series=True), out)


def sweep(config: RunConfig, out: Path) -> list[Path]:
    results = run_experiment(config, sweep_rules(config), keep_series=False)
    return _write_summaries(config, results, out)


def rush_hour(config: RunConfig, out: Path) -> list[Path]:
    if not _scheduled(config):
        raise ConfigurationError("rush hour needs rush_flows, rush_start and rush_end")
    return simulate(config, out)


def transient_drop(result: RepeatResult, onset: int, width: int, bins: int = 3) -> float:
    """Mean binned drop percentage over the first ``bins`` bins from ``onset``."""
    first = onset // width
    return float(np.mean(result.series["drop_pct"][first : first + bins]))


def window_bandwidth(result: RepeatResult, start: int, stop: int, width: int) -> float:
    """Mean binned bandwidth over bins covering ``[start, stop)``."""
    return float(np.mean(result.series["bandwidth"][start // width : stop // width]))
