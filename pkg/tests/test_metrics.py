import numpy as np
import pytest
from hypothesis import given, strategies as st

from plasticflow.errors import MetricError
from plasticflow.metrics import (
    FlowStats,
    RunReport,
    bandwidth,
    bin_means,
    binned_series,
    drop_penalty,
    parameter_robustness,
    queue_penalty,
    welch_less,
)


def flow(i, load=100, time=10, dropped=0, queued=0, path=2):
    return FlowStats(i, load, path, load + dropped, load if time else 0, dropped, queued, 0, time)


def report(*flows, series=None):
    return RunReport(list(flows), series or {}, steps=0, capacity=100)


def test_bandwidth_examples():
    assert bandwidth(report(flow(0))) == 10
    assert bandwidth(report(flow(0), flow(1, time=20))) == 7.5


def test_bandwidth_needs_complete_flows():
    with pytest.raises(MetricError, match="flow 3"):
        bandwidth(report(flow(0), flow(3, time=None)))


def test_drop_penalty_examples():
    assert drop_penalty(report(flow(0, dropped=50))) == 50
    assert drop_penalty(report(flow(0, dropped=250))) == 250
    assert drop_penalty(report(flow(0))) == 0


def test_queue_penalty_example():
    assert queue_penalty(report(flow(0, queued=20, path=2))) == 10
    assert queue_penalty(report(flow(0))) == 0


def test_parameter_robustness():
    same = parameter_robustness([((1, 0.5), 10.0, 5.0)] * 3)
    assert same["bandwidth"].std == 0 and same["penalty"].cv == 0
    spread = parameter_robustness([(None, 1.0, 2.0), (None, 3.0, 6.0)])
    assert spread["bandwidth"].mean == 2.0
    assert spread["penalty"].std == pytest.approx(np.std([2.0, 6.0], ddof=1))
    assert spread["penalty"].cv == pytest.approx(spread["penalty"].std / 4.0)
    with pytest.raises(MetricError):
        parameter_robustness([(None, 1.0, 2.0)])


def test_bin_means_examples():
    assert bin_means([1, 2, 3, 4], 2).tolist() == [1.5, 3.5]
    assert bin_means([1, 2, 3], 2).tolist() == [1.5, 3.0]
    with pytest.raises(ValueError):
        bin_means([1], 0)


@given(values=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=300), width=st.integers(1, 50))
def test_bin_means_recombine_to_global_mean(values, width):
    bins = bin_means(values, width)
    weights = [min(width, len(values) - i) for i in range(0, len(values), width)]
    assert len(bins) == len(weights)
    assert np.average(bins, weights=weights) == pytest.approx(np.mean(values), rel=1e-9, abs=1e-6)


def test_binned_series_granularity():
    steps = 3000
    series = {
        "injected": np.full(steps, 10.0), "delivered": np.full(steps, 8.0),
        "dropped": np.full(steps, 1.0), "queued": np.zeros(steps),
        "active": np.full(steps, 4.0), "source_weight": np.full(steps, 7.0),
    }
    rep = report(series=series)
    for q in ("bandwidth", "drop_pct", "queue_pct", "source_weight"):
        assert len(binned_series(rep, 100, q)) == 30
    assert binned_series(rep, 100, "bandwidth")[0] == 2.0
    assert binned_series(rep, 100, "drop_pct")[0] == 10.0
    with pytest.raises(ValueError):
        binned_series(rep, 100, "nonsense")


def test_binned_ratio_is_nan_without_injection():
    series = {k: np.zeros(4) for k in ("injected", "delivered", "dropped", "queued", "active")}
    assert np.isnan(binned_series(report(series=series), 2, "drop_pct")).all()


def test_welch_less_against_reference():
    a, b = [1.0, 2.0, 1.5, 1.2], [3.0, 2.5, 3.5, 4.0]
    # hand-computed Welch statistic and Welch-Satterthwaite degrees of freedom
    va, vb = np.var(a, ddof=1) / 4, np.var(b, ddof=1) / 4
    t = (np.mean(a) - np.mean(b)) / np.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / 3 + vb**2 / 3)
    from scipy.stats import t as student

    assert welch_less(a, b) == pytest.approx(student.cdf(t, df))
    assert welch_less(a, b) < 0.01
    assert welch_less(b, a) > 0.99
