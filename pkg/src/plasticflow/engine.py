"""Discrete-time store-and-forward simulation of plasticity-controlled flows.

One step of the simulation:

1. every incomplete flow inside its injection window offers
   ``min(W(source edge), load - delivered - in_flight)`` new units;
2. every edge serves its FIFO queue first, then the flows waiting at its
   tail in a random order, each up to the remaining weight budget; excess
   is dropped or queued; units advance exactly one hop per step;
3. units crossing a router -> target edge are delivered;
4. every non-fixed edge that saw demand updates its weight from the jam
   flags of this step;
5. flows that delivered their full load record the completion step.

The step loop runs in a numba kernel over flat arrays. ``Engine`` owns those
arrays and exposes ``step``, ``run`` and ``apply_traffic_schedule``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numba
import numpy as np

from plasticflow.errors import ConfigurationError, ContractViolation
from plasticflow.metrics import SERIES_FIELDS, FlowStats, RunReport
from plasticflow.plasticity import UpdateRule, update_weight
from plasticflow.routing import Path, route_flows, shuffled_successors
from plasticflow.topology import NetworkGraph, NodeRole

# per-flow counter columns
INJ, DEL, DROP, QUEUED, INFLIGHT, DONE = range(6)
# per-step series columns, same order as metrics.SERIES_FIELDS
S_INJ, S_DEL, S_DROP, S_QUEUED, S_ACTIVE, S_SRCW = range(6)
# queue pool record columns
Q_FLOW, Q_POS, Q_UNITS, Q_NEXT = range(4)

NEVER = np.iinfo(np.int64).max // 4

RUN_DONE, RUN_LIMIT, RUN_GROW = 0, 1, 2


class CongestionModel(str, Enum):
    DROP = "drop"
    QUEUE = "queue"


@dataclass(frozen=True)
class FlowSpec:
    """A transfer of ``load`` units; injects only for steps in [start, end]."""

    source: int
    target: int
    load: int
    start: int = 0
    end: int | None = None
    flow_id: int | None = None


@dataclass(frozen=True)
class StepReport:
    t: int
    injected: int
    delivered: int
    dropped: int
    queued: int
    weights: np.ndarray | None = field(default=None, repr=False)


@numba.njit(cache=True)
def _next_random(state):
    # splitmix64
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _touch(e, t, stamp, demand, budget, contrib, ehead, weight, touched, nt):
    if stamp[e] != t:
        stamp[e] = t
        demand[e] = 0
        budget[e] = weight[e]
        contrib[e] = False
        ehead[e] = -1
        touched[nt] = e
        return nt + 1
    return nt


@numba.njit(cache=True)
def _forward(g, p, units, hops, nxt, ctr):
    if p + 1 < hops[g]:
        nxt[g, p + 1] += units
        return 0
    ctr[g, DEL] += units
    ctr[g, INFLIGHT] -= units
    return units


@numba.njit(cache=True)
def _run_kernel(
    t0, t_stop, model, code, ki, kd, capacity,
    weight, fixed, path, hops, load, window, ctr, pending, nxt,
    qrec, qhead, qtail, qfree, qmeta, qunits, qedges, inq,
    stamp, demand, budget, contrib, jam, touched,
    ent_f, ent_j, ehead, enext, buf, rng, series,
):
    n_flows, max_hops = path.shape
    reserve = n_flows * max_hops
    t = t0
    while t < t_stop:
        # a run is over once nothing can inject and nothing is in flight
        busy = False
        for f in range(n_flows):
            if ctr[f, DONE] < 0 and (t <= window[f, 1] or ctr[f, INFLIGHT] > 0):
                busy = True
                break
        if not busy:
            return t, RUN_DONE
        if model == 1 and qmeta[0] < reserve:
            return t, RUN_GROW

        s_inj = 0
        s_del = 0
        s_drop = 0
        s_queued = 0
        n_active = 0
        src_w = 0.0

        # 1. injection
        for f in range(n_flows):
            if ctr[f, DONE] >= 0 or t < window[f, 0] or t > window[f, 1]:
                continue
            se = path[f, 0]
            n_active += 1
            src_w += weight[se]
            remaining = load[f] - ctr[f, DEL] - ctr[f, INFLIGHT]
            amount = min(weight[se], remaining)
            if amount > 0:
                pending[f, 0] += amount
                ctr[f, INJ] += amount
                ctr[f, INFLIGHT] += amount
                s_inj += amount

        # 2a. demand from fresh arrivals, bucketed per edge
        nt = 0
        n_ent = 0
        for f in range(n_flows):
            if ctr[f, INFLIGHT] == 0:
                continue
            for j in range(hops[f]):
                units = pending[f, j]
                if units > 0:
                    e = path[f, j]
                    nt = _touch(e, t, stamp, demand, budget, contrib, ehead, weight, touched, nt)
                    demand[e] += units
                    ent_f[n_ent] = f
                    ent_j[n_ent] = j
                    enext[n_ent] = ehead[e]
                    ehead[e] = n_ent
                    n_ent += 1
        n_fresh = nt

        # 2b. queued data goes first, FIFO
        if model == 1:
            kept = 0
            for k in range(qmeta[1]):
                e = qedges[k]
                if qunits[e] == 0:
                    inq[e] = False
                    continue
                qedges[kept] = e
                kept += 1
                nt = _touch(e, t, stamp, demand, budget, contrib, ehead, weight, touched, nt)
                demand[e] += qunits[e]
                node = qhead[e]
                while node != -1 and budget[e] > 0:
                    g = qrec[node, Q_FLOW]
                    p = qrec[node, Q_POS]
                    units = qrec[node, Q_UNITS]
                    sent = min(units, budget[e])
                    budget[e] -= sent
                    qunits[e] -= sent
                    s_del += _forward(g, p, sent, hops, nxt, ctr)
                    if sent < units:
                        qrec[node, Q_UNITS] = units - sent
                        break
                    nxt_node = qrec[node, Q_NEXT]
                    qfree[qmeta[0]] = node
                    qmeta[0] += 1
                    node = nxt_node
                qhead[e] = node
                if node == -1:
                    qtail[e] = -1
            qmeta[1] = kept

        # 2c. fresh arrivals, flows served in a fresh random order per edge
        for k in range(n_fresh):
            e = touched[k]
            count = 0
            idx = ehead[e]
            while idx != -1:
                buf[count] = idx
                count += 1
                idx = enext[idx]
            for i in range(count - 1, 0, -1):
                r = np.int64(_next_random(rng) % np.uint64(i + 1))
                tmp = buf[i]
                buf[i] = buf[r]
                buf[r] = tmp
            for i in range(count):
                f = ent_f[buf[i]]
                j = ent_j[buf[i]]
                units = pending[f, j]
                pending[f, j] = 0
                sent = min(units, budget[e])
                budget[e] -= sent
                if sent > 0:
                    s_del += _forward(f, j, sent, hops, nxt, ctr)
                excess = units - sent
                if excess == 0:
                    continue
                if model == 0:
                    ctr[f, DROP] += excess
                    ctr[f, INFLIGHT] -= excess
                    s_drop += excess
                    continue
                tail = qtail[e]
                if tail != -1 and qrec[tail, Q_FLOW] == f:
                    qrec[tail, Q_UNITS] += excess
                else:
                    qmeta[0] -= 1
                    node = qfree[qmeta[0]]
                    qrec[node, Q_FLOW] = f
                    qrec[node, Q_POS] = j
                    qrec[node, Q_UNITS] = excess
                    qrec[node, Q_NEXT] = -1
                    if tail == -1:
                        qhead[e] = node
                    else:
                        qrec[tail, Q_NEXT] = node
                    qtail[e] = node
                if not inq[e]:
                    inq[e] = True
                    qedges[qmeta[1]] = e
                    qmeta[1] += 1
                qunits[e] += excess
                ctr[f, QUEUED] += excess
                s_queued += excess

        # 4. plasticity: jam flags first, then upstream contribution
        for k in range(nt):
            e = touched[k]
            jam[e] = demand[e] > weight[e]
        for f in range(n_flows):
            if ctr[f, INFLIGHT] == 0:
                continue
            for p in range(1, hops[f]):
                down = path[f, p]
                if nxt[f, p] > 0 and stamp[down] == t and jam[down]:
                    contrib[path[f, p - 1]] = True
        for k in range(nt):
            e = touched[k]
            if fixed[e]:
                continue
            if jam[e] or not contrib[e]:
                action = 1
            else:
                action = 2
            # Oja's activity term is the traffic that actually crossed the edge
            carried = weight[e] - budget[e]
            weight[e] = update_weight(code, action, weight[e], carried, capacity, ki, kd)

        # data advances one hop; 5. completion
        for f in range(n_flows):
            if ctr[f, DONE] >= 0:
                continue
            for j in range(hops[f]):
                pending[f, j] = nxt[f, j]
                nxt[f, j] = 0
            if ctr[f, DEL] == load[f]:
                ctr[f, DONE] = t + 1

        series[t, S_INJ] = s_inj
        series[t, S_DEL] = s_del
        series[t, S_DROP] = s_drop
        series[t, S_QUEUED] = s_queued
        series[t, S_ACTIVE] = n_active
        series[t, S_SRCW] = src_w / n_active if n_active > 0 else np.nan
        t += 1
    return t, RUN_LIMIT


def _derive_seeds(seed: int) -> tuple[int, np.ndarray]:
    routing_ss, step_ss = np.random.SeedSequence(seed).spawn(2)
    return int(routing_ss.generate_state(1)[0]), step_ss.generate_state(1, np.uint64)


class Engine:
    """Mutable simulation state for one run.

    All edge weights start at the capacity. Router -> target edges are fixed
    at the capacity and never update.
    """

    def __init__(
        self,
        graph: NetworkGraph,
        flows: Sequence[FlowSpec],
        rule: UpdateRule,
        model: CongestionModel | str = CongestionModel.DROP,
        seed: int = 0,
    ):
        self.graph = graph
        self.rule = rule
        self.model = CongestionModel(model)
        self.seed = seed
        self.capacity = int(graph.capacity)
        self.t = 0
        routing_seed, self._rng = _derive_seeds(seed)
        self._adjacency = shuffled_successors(graph, routing_seed)

        E = graph.num_edges
        self.weight = np.full(E, self.capacity, dtype=np.int64)
        tgt = graph.roles[graph.edges[:, 1]] == NodeRole.TARGET
        self.fixed = np.ascontiguousarray(tgt)
        self._stamp = np.full(E, -1, dtype=np.int64)
        self._demand = np.zeros(E, dtype=np.int64)
        self._budget = np.zeros(E, dtype=np.int64)
        self._contrib = np.zeros(E, dtype=np.bool_)
        self._jam = np.zeros(E, dtype=np.bool_)
        self._touched = np.zeros(E, dtype=np.int64)
        self._ehead = np.full(E, -1, dtype=np.int64)
        self._qhead = np.full(E, -1, dtype=np.int64)
        self._qtail = np.full(E, -1, dtype=np.int64)
        self._qunits = np.zeros(E, dtype=np.int64)
        self._qedges = np.zeros(E, dtype=np.int64)
        self._inq = np.zeros(E, dtype=np.bool_)
        self._qmeta = np.zeros(2, dtype=np.int64)  # free slots, queued edge count
        self._qrec = np.zeros((0, 4), dtype=np.int64)
        self._qfree = np.zeros(0, dtype=np.int64)
        self._series = np.zeros((0, len(SERIES_FIELDS)), dtype=np.float64)

        self.specs: list[FlowSpec] = []
        self.paths: list[Path] = []
        self._path = np.zeros((0, 1), dtype=np.int64)
        self._hops = np.zeros(0, dtype=np.int64)
        self._load = np.zeros(0, dtype=np.int64)
        self._window = np.zeros((0, 2), dtype=np.int64)
        self._ctr = np.zeros((0, 6), dtype=np.int64)
        self._pending = np.zeros((0, 1), dtype=np.int64)
        self._nxt = np.zeros((0, 1), dtype=np.int64)
        self._add_flows(flows)

    # -- flow bookkeeping -------------------------------------------------

    def _add_flows(self, specs: Iterable[FlowSpec]) -> None:
        specs = list(specs)
        if not specs and self.specs:
            return
        used = {s.flow_id for s in self.specs}
        next_id = max(used, default=-1) + 1
        named = []
        for spec in specs:
            if spec.load < 1:
                raise ConfigurationError(f"flow load must be >= 1, got {spec.load}")
            if spec.end is not None and spec.end < spec.start:
                raise ConfigurationError(f"flow window [{spec.start}, {spec.end}] is empty")
            if spec.flow_id is None:
                while next_id in used:
                    next_id += 1
                spec = FlowSpec(spec.source, spec.target, spec.load, spec.start, spec.end, next_id)
            if spec.flow_id in used:
                raise ConfigurationError(f"duplicate flow id {spec.flow_id}")
            used.add(spec.flow_id)
            named.append(spec)
        paths = route_flows(
            self.graph, [(s.source, s.target) for s in named], adjacency=self._adjacency
        )
        index = self.graph.edge_index
        self.specs += named
        self.paths += paths
        F = len(self.specs)
        H = max([p.hop_count for p in self.paths], default=1)
        old_F = self._path.shape[0]

        def grow(arr, fill):
            out = np.full((F, H), fill, dtype=np.int64)
            out[:old_F, : arr.shape[1]] = arr
            return out

        self._path = grow(self._path, -1)
        self._pending = grow(self._pending, 0)
        self._nxt = grow(self._nxt, 0)
        for i, p in enumerate(paths, start=old_F):
            self._path[i, : p.hop_count] = [index[e] for e in p.edges]
        self._hops = np.concatenate([self._hops, [p.hop_count for p in paths]]).astype(np.int64)
        self._load = np.concatenate([self._load, [s.load for s in named]]).astype(np.int64)
        win = [(s.start, NEVER if s.end is None else s.end) for s in named]
        self._window = np.concatenate([self._window, np.array(win, dtype=np.int64).reshape(-1, 2)])
        ctr = np.zeros((len(named), 6), dtype=np.int64)
        ctr[:, DONE] = -1
        self._ctr = np.concatenate([self._ctr, ctr])
        n_ent = F * H
        self._ent_f = np.zeros(n_ent, dtype=np.int64)
        self._ent_j = np.zeros(n_ent, dtype=np.int64)
        self._enext = np.zeros(n_ent, dtype=np.int64)
        self._buf = np.zeros(n_ent, dtype=np.int64)
        if self.model is CongestionModel.QUEUE:
            self._grow_pool(max(4 * n_ent, 1024))

    def _grow_pool(self, minimum_free: int) -> None:
        free = int(self._qmeta[0])
        if free >= minimum_free:
            return
        old = len(self._qrec)
        new = max(2 * old, old + minimum_free - free)
        self._qrec = np.concatenate([self._qrec, np.zeros((new - old, 4), dtype=np.int64)])
        # free-stack holds every unused slot index
        stack = np.zeros(new, dtype=np.int64)
        stack[:free] = self._qfree[:free]
        stack[free : free + new - old] = np.arange(old, new)
        self._qfree = stack
        self._qmeta[0] = free + new - old

    def apply_traffic_schedule(self, schedule) -> None:
        """Add flows that inject only inside their ``(start, end)`` windows.

        ``schedule`` is an iterable of ``(start_step, end_step, flow_specs)``;
        the window bounds override the specs' own.
        """
        extra = []
        for start, end, specs in schedule:
            if start < 0 or end < start:
                raise ConfigurationError(f"bad schedule window [{start}, {end}]")
            for s in specs:
                extra.append(FlowSpec(s.source, s.target, s.load, start, end, s.flow_id))
        ids = [s.flow_id for s in extra if s.flow_id is not None]
        if len(ids) != len(set(ids)):
            raise ConfigurationError("duplicate flow ids in traffic schedule")
        if extra:
            self._add_flows(extra)

    # -- stepping ------------------------------------------------------------

    def _ensure_series(self, t_stop: int) -> None:
        if len(self._series) >= t_stop:
            return
        size = max(t_stop, 2 * len(self._series))
        grown = np.zeros((size, len(SERIES_FIELDS)), dtype=np.float64)
        grown[: len(self._series)] = self._series
        self._series = grown

    def _advance(self, t_stop: int) -> int:
        self._ensure_series(t_stop)
        while True:
            t, status = _run_kernel(
                self.t, t_stop, 1 if self.model is CongestionModel.QUEUE else 0,
                self.rule.kind.code, float(self.rule.ki), float(self.rule.kd), self.capacity,
                self.weight, self.fixed, self._path, self._hops, self._load, self._window,
                self._ctr, self._pending, self._nxt,
                self._qrec, self._qhead, self._qtail, self._qfree, self._qmeta,
                self._qunits, self._qedges, self._inq,
                self._stamp, self._demand, self._budget, self._contrib, self._jam,
                self._touched, self._ent_f, self._ent_j, self._ehead, self._enext, self._buf,
                self._rng, self._series,
            )
            self.t = t
            if status != RUN_GROW:
                return status
            self._grow_pool(2 * len(self._qrec))

    @property
    def finished(self) -> bool:
        ctr, win = self._ctr, self._window
        live = (ctr[:, DONE] < 0) & ((self.t <= win[:, 1]) | (ctr[:, INFLIGHT] > 0))
        return not live.any()

    def step(self, snapshot: bool = False) -> StepReport:
        """Execute exactly one step, even if every flow is already done."""
        t = self.t
        self._ensure_series(t + 1)
        status = self._advance(t + 1)
        if status == RUN_DONE:
            # nothing live: the step is a no-op on all counters
            self._series[t] = 0.0
            self._series[t, S_SRCW] = np.nan
            self.t = t + 1
        row = self._series[t]
        return StepReport(
            t=t,
            injected=int(row[S_INJ]),
            delivered=int(row[S_DEL]),
            dropped=int(row[S_DROP]),
            queued=int(row[S_QUEUED]),
            weights=self.weight.copy() if snapshot else None,
        )

    def run(self, max_steps: int) -> RunReport:
        """Step until every flow is done or ``max_steps`` more steps elapse."""
        if max_steps < 1:
            raise ContractViolation(f"max_steps must be >= 1, got {max_steps}")
        self._advance(self.t + max_steps)
        return self.report()

    # -- inspection ------------------------------------------------------------

    def queue_contents(self, edge: int) -> list[tuple[int, int]]:
        """FIFO records ``(flow_id, units)`` waiting on ``edge``."""
        out = []
        node = self._qhead[edge]
        while node != -1:
            f = int(self._qrec[node, Q_FLOW])
            out.append((self.specs[f].flow_id, int(self._qrec[node, Q_UNITS])))
            node = self._qrec[node, Q_NEXT]
        return out

    def queued_units(self) -> np.ndarray:
        return self._qunits.copy()

    def in_network(self) -> np.ndarray:
        """Units of each flow sitting on edges or in queues, recounted from state."""
        units = self._pending.sum(axis=1)
        if self.model is CongestionModel.QUEUE:
            units = units.copy()
            for e in np.flatnonzero(self._qhead >= 0):
                node = self._qhead[e]
                while node != -1:
                    units[self._qrec[node, Q_FLOW]] += self._qrec[node, Q_UNITS]
                    node = self._qrec[node, Q_NEXT]
        return units

    def flow_stats(self) -> list[FlowStats]:
        out = []
        for i, (spec, path) in enumerate(zip(self.specs, self.paths)):
            c = self._ctr[i]
            out.append(
                FlowStats(
                    flow_id=spec.flow_id,
                    load=spec.load,
                    path_length=path.hop_count,
                    injected=int(c[INJ]),
                    delivered=int(c[DEL]),
                    dropped=int(c[DROP]),
                    queued_total=int(c[QUEUED]),
                    in_flight=int(c[INFLIGHT]),
                    completion_time=int(c[DONE]) if c[DONE] >= 0 else None,
                    start_step=spec.start,
                    end_step=spec.end,
                )
            )
        return out

    def source_edges(self) -> np.ndarray:
        return self._path[:, 0].copy()

    def report(self) -> RunReport:
        series = {
            name: self._series[: self.t, col].copy() for col, name in enumerate(SERIES_FIELDS)
        }
        return RunReport(
            flows=self.flow_stats(),
            series=series,
            steps=self.t,
            capacity=self.capacity,
            meta={"rule": self.rule, "model": self.model.value, "seed": self.seed},
        )
