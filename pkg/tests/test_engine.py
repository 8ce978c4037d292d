import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import R, S, T, make_graph
from plasticflow.engine import CongestionModel, Engine, FlowSpec
from plasticflow.errors import ConfigurationError, ContractViolation, RoutingError
from plasticflow.metrics import bandwidth, drop_penalty, queue_penalty
from plasticflow.plasticity import RuleKind, UpdateRule
from plasticflow.topology import build_uniform_topology

MAXSEND = UpdateRule("maxsend")
AIMD = UpdateRule("aimd", 1.0, 0.5)


def two_bottleneck_graph():
    """Flows A and B share r1->r2->r3; flow D joins at r2. Capacity 1."""
    roles = [S, S, S, R, R, R, T, T, T]
    edges = [(0, 3), (1, 3), (2, 4), (3, 4), (4, 5), (5, 6), (5, 7), (5, 8)]
    return make_graph(roles, edges, capacity=1)


def test_initial_weights_are_capacity(line_graph):
    e = Engine(line_graph, [FlowSpec(0, 3, 5)], AIMD)
    assert (e.weight == line_graph.capacity).all()
    assert e.fixed.tolist() == [False, False, True]
    assert e.queued_units().sum() == 0


def test_zero_flows_is_noop(line_graph):
    e = Engine(line_graph, [], AIMD)
    rep = e.step()
    assert (rep.injected, rep.delivered, rep.dropped, rep.queued) == (0, 0, 0, 0)
    assert (e.weight == line_graph.capacity).all()
    assert e.finished


def test_routing_error_propagates():
    g = make_graph([S, R, R, T], [(0, 1), (2, 3)])
    with pytest.raises(RoutingError):
        Engine(g, [FlowSpec(0, 3, 5)], AIMD)


def test_line_graph_completion_time(line_graph):
    rep = Engine(line_graph, [FlowSpec(0, 3, 20)], MAXSEND).run(100)
    f = rep.flows[0]
    # hop_count + ceil(L / C) - 1 steps
    assert f.completion_time == 3 + 2 - 1
    assert f.dropped == 0
    assert rep.steps == 4
    assert bandwidth(rep) == pytest.approx(5.0)


def test_run_on_finished_engine_takes_no_steps(line_graph):
    e = Engine(line_graph, [FlowSpec(0, 3, 20)], MAXSEND)
    e.run(100)
    assert e.run(50).steps == 4


def test_run_rejects_zero_steps(line_graph):
    with pytest.raises(ContractViolation):
        Engine(line_graph, [], AIMD).run(0)


@pytest.mark.parametrize("model", ["drop", "queue"])
def test_two_source_contention(contention_graph, model):
    e = Engine(contention_graph, [FlowSpec(0, 4, 100), FlowSpec(1, 4, 100)], MAXSEND, model)
    first = e.step()
    assert first.injected == 12
    second = e.step()  # both flows now want r2 -> r3 (weight 6)
    if model == "drop":
        assert (second.dropped, second.queued) == (6, 0)
    else:
        assert (second.dropped, second.queued) == (0, 6)
        assert e.queued_units().sum() == 6
    stats = e.flow_stats()
    assert sum(s.in_flight for s in stats) == 24 - second.dropped - 0


def test_contention_updates_weights(contention_graph):
    e = Engine(contention_graph, [FlowSpec(0, 4, 100), FlowSpec(1, 4, 100)], AIMD)
    e.step()  # source edges carry 6 each, nothing jams: LTP keeps them at C
    assert e.weight.tolist() == [6, 6, 6, 6]
    e.step()  # r2->r3 jams: it potentiates, both feeders depress
    idx = contention_graph.edge_index
    assert e.weight[idx[(2, 3)]] == 6
    assert e.weight[idx[(0, 2)]] == 3 and e.weight[idx[(1, 2)]] == 3
    assert e.weight[idx[(3, 4)]] == 6


def test_requeue_at_two_hops_counts_twice():
    g = two_bottleneck_graph()
    flows = [FlowSpec(0, 6, 1), FlowSpec(1, 7, 1), FlowSpec(2, 8, 2)]
    e = Engine(g, flows, MAXSEND, "queue", seed=3)
    rep = e.run(50)
    assert rep.all_complete
    queued = {f.flow_id: f.queued_total for f in rep.flows}
    assert sum(queued.values()) == 3
    assert max(queued[0], queued[1]) == 2
    assert rep.series["queued"].tolist()[:5] == [0, 1, 1, 1, 0]


def test_same_seed_same_report():
    g = build_uniform_topology(20, 4, 20, 20, seed=2, capacity=20)
    rng = np.random.default_rng(0)
    flows = [FlowSpec(int(s), int(t), 500) for s, t in zip(g.sources, rng.choice(g.targets, 20))]
    a = Engine(g, flows, AIMD, seed=9)
    b = Engine(g, flows, AIMD, seed=9)
    assert [p.nodes for p in a.paths] == [p.nodes for p in b.paths]
    ra, rb = a.run(3000), b.run(3000)
    assert ra.flows == rb.flows
    for name in ra.series:
        assert np.array_equal(ra.series[name], rb.series[name], equal_nan=True)
    assert np.array_equal(a.weight, b.weight)


def test_seed_changes_service_order():
    g = build_uniform_topology(20, 4, 20, 20, seed=2, capacity=20)
    rng = np.random.default_rng(0)
    flows = [FlowSpec(int(s), int(t), 500) for s, t in zip(g.sources, rng.choice(g.targets, 20))]
    drops = {drop_penalty(Engine(g, flows, AIMD, seed=s).run(3000)) for s in range(4)}
    assert len(drops) > 1


def test_empty_schedule_matches_plain_run(contention_graph):
    flows = [FlowSpec(0, 4, 50), FlowSpec(1, 4, 50)]
    a = Engine(contention_graph, flows, AIMD, seed=1)
    b = Engine(contention_graph, flows, AIMD, seed=1)
    b.apply_traffic_schedule([])
    assert a.run(500).flows == b.run(500).flows


def test_window_of_one_step(contention_graph):
    e = Engine(contention_graph, [FlowSpec(0, 4, 600)], AIMD)
    e.apply_traffic_schedule([(0, 0, [FlowSpec(1, 4, 600)])])
    rep = e.run(400)
    extra = rep.flow(1)
    assert extra.injected == 6
    assert not extra.complete
    assert extra.delivered + extra.dropped == 6
    assert rep.flow(0).complete


def test_window_limits_injection(contention_graph):
    e = Engine(contention_graph, [FlowSpec(0, 4, 10_000)], AIMD)
    e.apply_traffic_schedule([(5, 9, [FlowSpec(1, 4, 10_000)])])
    injecting = []
    for _ in range(20):
        before = e.flow_stats()[1].injected
        e.step()
        injecting.append(e.flow_stats()[1].injected > before)
    assert [t for t, on in enumerate(injecting) if on] == list(range(5, 10))


def test_schedule_rejects_duplicate_ids(contention_graph):
    e = Engine(contention_graph, [FlowSpec(0, 4, 10, flow_id=0)], AIMD)
    with pytest.raises(ConfigurationError):
        e.apply_traffic_schedule([(1, 5, [FlowSpec(1, 4, 10, flow_id=7)]),
                                  (3, 8, [FlowSpec(1, 4, 10, flow_id=7)])])
    with pytest.raises(ConfigurationError):
        e.apply_traffic_schedule([(1, 5, [FlowSpec(1, 4, 10, flow_id=0)])])


def test_schedule_rejects_bad_window(contention_graph):
    e = Engine(contention_graph, [], AIMD)
    with pytest.raises(ConfigurationError):
        e.apply_traffic_schedule([(5, 4, [FlowSpec(1, 4, 10)])])


def test_rejects_empty_load(line_graph):
    with pytest.raises(ConfigurationError):
        Engine(line_graph, [FlowSpec(0, 3, 0)], AIMD)


rules = st.sampled_from(
    [UpdateRule("aimd", 1.0, 0.5), UpdateRule("aisd", 2.0, 3.0), UpdateRule("mimd", 1.3, 0.6),
     UpdateRule("misd", 1.2, 2.0), UpdateRule("oja", 3.0, 2.0), UpdateRule("bangbang"), MAXSEND]
)


@st.composite
def scenarios(draw):
    n = draw(st.integers(4, 12))
    d = draw(st.sampled_from([2, 3] if n % 2 == 0 else [2]))
    capacity = draw(st.integers(1, 20))
    graph = build_uniform_topology(n, d, n, n, seed=draw(st.integers(0, 10**6)), capacity=capacity)
    k = draw(st.integers(1, n))
    flows = [
        FlowSpec(int(graph.sources[draw(st.integers(0, n - 1))]),
                 int(graph.targets[draw(st.integers(0, n - 1))]),
                 draw(st.integers(1, 40 * capacity)))
        for _ in range(k)
    ]
    start = draw(st.integers(0, 20))
    extra = [FlowSpec(int(graph.sources[0]), int(graph.targets[-1]), 10**6)]
    schedule = [(start, start + draw(st.integers(0, 15)), extra)]
    return graph, flows, schedule


@settings(max_examples=60)
@given(scenario=scenarios(), rule=rules, model=st.sampled_from(list(CongestionModel)),
       seed=st.integers(0, 2**32 - 1))
def test_step_invariants(scenario, rule, model, seed):
    graph, flows, schedule = scenario
    e = Engine(graph, flows, rule, model, seed=seed)
    e.apply_traffic_schedule(schedule)
    C = graph.capacity
    loads = [s.load for s in e.specs]
    for _ in range(150):
        before = e.flow_stats()
        report = e.step()
        stats = e.flow_stats()
        recount = e.in_network()
        for f, prev, s, load in zip(range(len(stats)), before, stats, loads):
            assert s.injected == s.delivered + s.dropped + s.in_flight
            assert s.in_flight == recount[f]
            assert s.delivered <= load
            assert s.complete == (s.delivered == load)
        assert report.injected == sum(s.injected - p.injected for s, p in zip(stats, before))
        assert report.delivered == sum(s.delivered - p.delivered for s, p in zip(stats, before))
        assert report.dropped == sum(s.dropped - p.dropped for s, p in zip(stats, before))
        assert report.queued == sum(s.queued_total - p.queued_total for s, p in zip(stats, before))
        assert e.weight.min() >= 1 and e.weight.max() <= C
        assert (e.weight[e.fixed] == C).all()
        if model is CongestionModel.DROP:
            assert e.queued_units().sum() == 0
            assert all(s.queued_total == 0 for s in stats)
        else:
            assert all(s.dropped == 0 for s in stats)
        if rule.kind is RuleKind.MAXSEND:
            assert (e.weight == C).all()
        if rule.kind is RuleKind.BANGBANG:
            assert np.isin(e.weight, [1, C]).all()
        if e.finished:
            break


@settings(max_examples=20)
@given(scenario=scenarios(), rule=rules, model=st.sampled_from(list(CongestionModel)))
def test_only_one_penalty_is_nonzero(scenario, rule, model):
    graph, flows, _ = scenario
    rep = Engine(graph, flows, rule, model, seed=1).run(400)
    assert drop_penalty(rep) >= 0 and queue_penalty(rep) >= 0
    assert drop_penalty(rep) == 0 or queue_penalty(rep) == 0


def test_framework_run_completes():
    g = build_uniform_topology(100, 6, 100, 100, seed=1, capacity=100)
    rng = np.random.default_rng(1)
    flows = [FlowSpec(int(s), int(t), 100 * 100) for s, t in zip(g.sources, rng.choice(g.targets, 100))]
    C = g.capacity
    rep = Engine(g, flows, AIMD, seed=1).run(10 * (100 * C // C))
    assert rep.all_complete
    assert bandwidth(rep) > 0
