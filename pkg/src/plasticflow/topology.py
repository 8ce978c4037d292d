"""Three-layer source -> router -> target networks.

Routers are wired by a random regular graph, a Barabasi-Albert graph or a
CAIDA AS-relationship file. Every undirected router link becomes two
directed edges. Sources and targets are then hung off random routers.
"""

from __future__ import annotations

import bz2
import gzip
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path

import numpy as np

from plasticflow.errors import ConstructionError, ParseError

MAX_ATTEMPTS = 1000


class NodeRole(IntEnum):
    SOURCE = 0
    ROUTER = 1
    TARGET = 2


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Directed graph with role-tagged nodes and a uniform edge capacity.

    Node ids are the integers ``0 .. len(roles) - 1``. ``labels`` optionally
    maps node ids back to external identifiers (AS numbers).
    """

    roles: np.ndarray
    edges: np.ndarray  # shape (E, 2), int64 (u, v)
    capacity: int = 1000
    labels: tuple | None = field(default=None)

    def __post_init__(self):
        roles = np.asarray(self.roles, dtype=np.int8)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        roles.flags.writeable = False
        edges.flags.writeable = False
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "edges", edges)
        if self.capacity < 1:
            raise ConstructionError(f"capacity must be >= 1, got {self.capacity}")

    @property
    def num_nodes(self) -> int:
        return len(self.roles)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def nodes_with_role(self, role: NodeRole) -> np.ndarray:
        return np.flatnonzero(self.roles == role)

    @property
    def sources(self) -> np.ndarray:
        return self.nodes_with_role(NodeRole.SOURCE)

    @property
    def routers(self) -> np.ndarray:
        return self.nodes_with_role(NodeRole.ROUTER)

    @property
    def targets(self) -> np.ndarray:
        return self.nodes_with_role(NodeRole.TARGET)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(u), int(v)): i for i, (u, v) in enumerate(self.edges)}

    @cached_property
    def successors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            out[u].append(int(v))
        return out

    @cached_property
    def predecessors(self) -> list[list[int]]:
        inc: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            inc[v].append(int(u))
        return inc

    def router_degrees(self) -> np.ndarray:
        """Number of distinct router neighbours of every router."""
        is_router = self.roles == NodeRole.ROUTER
        mask = is_router[self.edges[:, 0]] & is_router[self.edges[:, 1]]
        deg = np.bincount(self.edges[mask, 0], minlength=self.num_nodes)
        return deg[is_router]

    def feeder_router(self, node: int) -> int:
        """Router adjacent to a source (its only successor) or a target."""
        role = self.roles[node]
        if role == NodeRole.SOURCE:
            return self.successors[node][0]
        if role == NodeRole.TARGET:
            return self.predecessors[node][0]
        raise ValueError(f"node {node} is a router")

    def check(self) -> None:
        """Raise ConstructionError if any structural invariant is broken."""
        roles = self.roles
        u, v = self.edges[:, 0], self.edges[:, 1]
        if np.any(u == v):
            raise ConstructionError("self-loop present")
        if len(set(map(tuple, self.edges.tolist()))) != len(self.edges):
            raise ConstructionError("duplicate directed edge")
        out_deg = np.bincount(u, minlength=self.num_nodes)
        in_deg = np.bincount(v, minlength=self.num_nodes)
        src = roles == NodeRole.SOURCE
        tgt = roles == NodeRole.TARGET
        if np.any(out_deg[src] != 1) or np.any(in_deg[src] != 0):
            raise ConstructionError("each source needs exactly one outgoing edge and no incoming")
        if np.any(in_deg[tgt] != 1) or np.any(out_deg[tgt] != 0):
            raise ConstructionError("each target needs exactly one incoming edge and no outgoing")
        if np.any(roles[v[src[u]]] != NodeRole.ROUTER):
            raise ConstructionError("source edge must lead to a router")
        if np.any(roles[u[tgt[v]]] != NodeRole.ROUTER):
            raise ConstructionError("target edge must come from a router")


def _router_core(num_routers: int, pairs, capacity: int, labels=None) -> NetworkGraph:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    directed = np.concatenate([pairs, pairs[:, ::-1]]) if len(pairs) else pairs
    order = np.lexsort((directed[:, 1], directed[:, 0])) if len(directed) else []
    return NetworkGraph(
        roles=np.full(num_routers, NodeRole.ROUTER, dtype=np.int8),
        edges=directed[order],
        capacity=capacity,
        labels=labels,
    )


def _connected(n: int, pairs) -> bool:
    if n <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in pairs:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if not seen[y]:
                seen[y] = True
                count += 1
                queue.append(y)
    return count == n


def _stub_matching(n: int, d: int, rng: np.random.Generator):
    """One attempt at a simple d-regular pairing; None if it gets stuck.

    Stubs are paired at random; pairs forming self-loops or repeated edges
    go back into the pool and are re-shuffled until none remain.
    """
    edges: set[tuple[int, int]] = set()
    stubs = np.repeat(np.arange(n), d)
    while len(stubs):
        rng.shuffle(stubs)
        leftover: list[int] = []
        for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            if a > b:
                a, b = b, a
            if a != b and (a, b) not in edges:
                edges.add((a, b))
            else:
                leftover += (a, b)
        if not leftover:
            break
        pending = sorted(set(leftover))
        if not any(
            (a, b) not in edges for i, a in enumerate(pending) for b in pending[i + 1:]
        ):
            return None
        stubs = np.array(leftover)
    return sorted(edges)


def build_uniform_router_core(
    num_routers: int, router_degree: int, seed: int, capacity: int = 1000
) -> NetworkGraph:
    n, d = num_routers, router_degree
    if n < 1 or d < 0:
        raise ConstructionError("num_routers must be >= 1 and router_degree >= 0")
    if d >= n and n > 1:
        raise ConstructionError(f"router_degree {d} must be < num_routers {n}")
    if (n * d) % 2:
        raise ConstructionError(f"router_degree x num_routers must be even ({d} x {n})")
    if n > 1 and (d == 0 or (d == 1 and n > 2)):
        raise ConstructionError(f"degree {d} cannot connect {n} routers")
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        pairs = _stub_matching(n, d, rng) if d else []
        if pairs is not None and _connected(n, pairs):
            return _router_core(n, pairs, capacity)
    raise ConstructionError(f"no connected {d}-regular graph on {n} routers after {MAX_ATTEMPTS} attempts")


def build_scale_free_router_core(
    num_routers: int, attach_m: int, seed: int, capacity: int = 1000
) -> NetworkGraph:
    """Barabasi-Albert preferential attachment on ``num_routers`` routers.

    The first ``attach_m`` routers start unconnected; router ``attach_m``
    links to all of them and every later router links to ``attach_m``
    distinct existing routers chosen with probability proportional to degree.
    """
    n, m = num_routers, attach_m
    if m < 1 or m >= n:
        raise ConstructionError(f"attach_m must satisfy 1 <= m < num_routers, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    pairs: list[tuple[int, int]] = []
    # each endpoint appears once per incident edge
    endpoints: list[int] = []
    chosen = list(range(m))
    for new in range(m, n):
        for old in chosen:
            pairs.append((old, new))
        endpoints.extend(chosen)
        endpoints.extend([new] * m)
        picked: set[int] = set()
        while len(picked) < m:
            picked.add(endpoints[rng.integers(len(endpoints))])
        chosen = sorted(picked)
    return _router_core(n, pairs, capacity)


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt")
    if path.suffix == ".bz2":
        return bz2.open(path, "rt")
    return open(path)


def read_caida_pairs(path) -> list[tuple[int, int]]:
    """Parse ``as1|as2|rel`` lines into de-duplicated undirected AS pairs."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such CAIDA file: {path}")
    seen: set[tuple[int, int]] = set()
    pairs: list[tuple[int, int]] = []
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("|")
            if len(fields) < 3:
                raise ParseError(f"expected 'as1|as2|rel', got {line!r}", line=lineno)
            try:
                a, b = int(fields[0]), int(fields[1])
                int(fields[2])
            except ValueError:
                raise ParseError(f"non-integer field in {line!r}", line=lineno) from None
            if a == b:
                raise ParseError(f"AS {a} related to itself", line=lineno)
            key = (a, b) if a < b else (b, a)
            if key not in seen:
                seen.add(key)
                pairs.append(key)
    return pairs


def load_caida_router_core(path, capacity: int = 1000) -> NetworkGraph:
    pairs = read_caida_pairs(path)
    if not pairs:
        raise ConstructionError(f"{path}: no AS relationships found")
    asns = sorted({a for pair in pairs for a in pair})
    index = {a: i for i, a in enumerate(asns)}
    mapped = [(index[a], index[b]) for a, b in pairs]
    return _router_core(len(asns), mapped, capacity, labels=tuple(asns))


def attach_endpoints(
    router_core: NetworkGraph, num_sources: int, num_targets: int, seed: int
) -> NetworkGraph:
    """Add sources and targets, each tied to an independently uniform router.

    Source ids follow the routers, target ids follow the sources.
    """
    routers = router_core.routers
    if len(routers) == 0:
        raise ConstructionError("router core is empty")
    if num_sources < 0 or num_targets < 0:
        raise ConstructionError("endpoint counts must be non-negative")
    rng = np.random.default_rng(seed)
    src_router = routers[rng.integers(len(routers), size=num_sources)]
    tgt_router = routers[rng.integers(len(routers), size=num_targets)]
    base = router_core.num_nodes
    src_ids = base + np.arange(num_sources)
    tgt_ids = base + num_sources + np.arange(num_targets)
    roles = np.concatenate([
        router_core.roles,
        np.full(num_sources, NodeRole.SOURCE, dtype=np.int8),
        np.full(num_targets, NodeRole.TARGET, dtype=np.int8),
    ])
    edges = np.concatenate([
        router_core.edges,
        np.column_stack([src_ids, src_router]),
        np.column_stack([tgt_router, tgt_ids]),
    ])
    return NetworkGraph(roles, edges, router_core.capacity, router_core.labels)


def _endpoint_seed(seed: int) -> int:
    return int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])


def build_uniform_topology(
    num_routers: int, router_degree: int, num_sources: int, num_targets: int,
    seed: int, capacity: int = 1000,
) -> NetworkGraph:
    if min(num_routers, num_sources, num_targets) < 1:
        raise ConstructionError("all counts must be >= 1")
    core = build_uniform_router_core(num_routers, router_degree, seed, capacity)
    return attach_endpoints(core, num_sources, num_targets, _endpoint_seed(seed))


def build_scale_free_topology(
    num_routers: int, attach_m: int, num_sources: int, num_targets: int,
    seed: int, capacity: int = 1000,
) -> NetworkGraph:
    if min(num_routers, num_sources, num_targets) < 1:
        raise ConstructionError("all counts must be >= 1")
    core = build_scale_free_router_core(num_routers, attach_m, seed, capacity)
    return attach_endpoints(core, num_sources, num_targets, _endpoint_seed(seed))


def load_caida(
    path, num_sources: int, num_targets: int, seed: int, capacity: int = 1000
) -> NetworkGraph:
    core = load_caida_router_core(path, capacity)
    return attach_endpoints(core, num_sources, num_targets, _endpoint_seed(seed))


def graph_stats(graph: NetworkGraph) -> dict[str, float]:
    deg = graph.router_degrees()
    return {
        "routers": int(len(graph.routers)),
        "sources": int(len(graph.sources)),
        "targets": int(len(graph.targets)),
        "directed_edges": int(graph.num_edges),
        "directed_router_edges": int(deg.sum()),
        "mean_router_degree": float(deg.mean()) if len(deg) else 0.0,
        "median_router_degree": float(np.median(deg)) if len(deg) else 0.0,
        "max_router_degree": int(deg.max()) if len(deg) else 0,
        "capacity": int(graph.capacity),
    }
