"""Objective functions and time-series summaries over run reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from plasticflow.errors import MetricError

SERIES_FIELDS = ("injected", "delivered", "dropped", "queued", "active", "source_weight")


@dataclass(frozen=True)
class FlowStats:
    flow_id: int
    load: int
    path_length: int
    injected: int
    delivered: int
    dropped: int
    queued_total: int
    in_flight: int
    completion_time: int | None
    start_step: int = 0
    end_step: int | None = None

    @property
    def complete(self) -> bool:
        return self.completion_time is not None


@dataclass
class RunReport:
    """Per-flow totals plus per-step network totals for one run.

    ``series`` maps each name in SERIES_FIELDS to an array with one entry
    per executed step. ``source_weight`` is the mean weight of the source
    edges of flows injecting at that step (nan when none are).
    """

    flows: list[FlowStats]
    series: dict[str, np.ndarray]
    steps: int
    capacity: int
    meta: dict = field(default_factory=dict)

    def flow(self, flow_id: int) -> FlowStats:
        for f in self.flows:
            if f.flow_id == flow_id:
                return f
        raise KeyError(flow_id)

    @property
    def all_complete(self) -> bool:
        return all(f.complete for f in self.flows)


def _select(report: RunReport, flows):
    return report.flows if flows is None else [report.flow(i) for i in flows]


def bandwidth(report: RunReport, flows: Sequence[int] | None = None) -> float:
    """Mean over flows of load / completion time (data units per step)."""
    chosen = _select(report, flows)
    if not chosen:
        raise MetricError("bandwidth of an empty flow set")
    for f in chosen:
        if not f.complete:
            raise MetricError(f"flow {f.flow_id} did not complete")
    return float(np.mean([f.load / f.completion_time for f in chosen]))


def drop_penalty(report: RunReport, flows: Sequence[int] | None = None) -> float:
    """Mean percentage of each flow's load that was dropped; may exceed 100."""
    chosen = _select(report, flows)
    if not chosen:
        return 0.0
    return float(100.0 * np.mean([f.dropped / f.load for f in chosen]))


def queue_penalty(report: RunReport, flows: Sequence[int] | None = None) -> float:
    """Mean percentage of load queued per hop (each enqueue counts)."""
    chosen = _select(report, flows)
    if not chosen:
        return 0.0
    return float(100.0 * np.mean([f.queued_total / (f.load * f.path_length) for f in chosen]))


@dataclass(frozen=True)
class Dispersion:
    mean: float
    std: float
    cv: float


def _dispersion(values) -> Dispersion:
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    cv = std / abs(mean) if mean != 0 else (0.0 if std == 0 else float("inf"))
    return Dispersion(mean, std, cv)


def parameter_robustness(sweep_results) -> dict[str, Dispersion]:
    """Spread of (params, bandwidth, penalty) points across a parameter sweep."""
    sweep_results = list(sweep_results)
    if len(sweep_results) < 2:
        raise MetricError("parameter robustness needs at least two sweep points")
    _, bw, pen = zip(*sweep_results)
    return {"bandwidth": _dispersion(bw), "penalty": _dispersion(pen)}


def bin_means(values, width: int) -> np.ndarray:
    """Means of consecutive ``width``-long bins; a short last bin uses its own length."""
    if width < 1:
        raise ValueError("bin width must be >= 1")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values
    starts = np.arange(0, values.size, width)
    sums = np.add.reduceat(values, starts)
    lengths = np.diff(np.append(starts, values.size))
    return sums / lengths


def bin_sums(values, width: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values
    return np.add.reduceat(values, np.arange(0, values.size, width))


def _ratio(num, den, scale=1.0):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.full(num.shape, np.nan)
    np.divide(num, den, out=out, where=den > 0)
    return scale * out


def binned_series(report: RunReport, width: int, quantity: str) -> np.ndarray:
    """Per-bin values of a derived time series.

    ``quantity`` is one of SERIES_FIELDS (plain bin mean) or
    ``"bandwidth"`` (delivered units per active flow per step),
    ``"drop_pct"`` / ``"queue_pct"`` (units dropped / queued in the bin as a
    percentage of units injected in the bin).
    """
    s = report.series
    if quantity in SERIES_FIELDS:
        return bin_means(s[quantity], width)
    if quantity == "bandwidth":
        return _ratio(bin_sums(s["delivered"], width), bin_sums(s["active"], width))
    if quantity == "drop_pct":
        return _ratio(bin_sums(s["dropped"], width), bin_sums(s["injected"], width), 100.0)
    if quantity == "queue_pct":
        return _ratio(bin_sums(s["queued"], width), bin_sums(s["injected"], width), 100.0)
    raise ValueError(f"unknown series quantity {quantity!r}")


def welch_less(a, b) -> float:
    """One-sided p-value for mean(a) < mean(b), Welch two-sample t-test."""
    return float(stats.ttest_ind(a, b, equal_var=False, alternative="less").pvalue)
