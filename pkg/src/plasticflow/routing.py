"""Fixed minimum-hop routes from each source to its target."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from plasticflow.errors import ContractViolation, RoutingError
from plasticflow.topology import NetworkGraph, NodeRole


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]

    @property
    def hop_count(self) -> int:
        return len(self.nodes) - 1

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes[:-1], self.nodes[1:]))

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class Adjacency:
    """CSR successor lists; BFS expands neighbours in stored order."""

    indptr: np.ndarray
    indices: np.ndarray

    def neighbours(self, node: int) -> list[int]:
        return self.indices[self.indptr[node] : self.indptr[node + 1]].tolist()


def shuffled_successors(graph: NetworkGraph, seed: int) -> Adjacency:
    """Successor lists in a seed-derived random order, fixed for a run."""
    rng = np.random.default_rng(seed)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    order = np.lexsort((rng.random(len(u)), u))
    indptr = np.zeros(graph.num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=graph.num_nodes), out=indptr[1:])
    return Adjacency(indptr, np.ascontiguousarray(v[order]))


@numba.njit(cache=True)
def _bfs_parents(indptr, indices, start):
    parent = np.full(len(indptr) - 1, -1, dtype=np.int64)
    parent[start] = start
    queue = np.empty(len(indptr) - 1, dtype=np.int64)
    queue[0] = start
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if parent[v] == -1:
                parent[v] = u
                queue[tail] = v
                tail += 1
    return parent


def _walk_back(parent: np.ndarray, start: int, goal: int) -> tuple[int, ...]:
    nodes = [goal]
    while nodes[-1] != start:
        nodes.append(int(parent[nodes[-1]]))
    return tuple(reversed(nodes))


def _check_endpoints(graph: NetworkGraph, source: int, target: int) -> None:
    if graph.roles[source] != NodeRole.SOURCE:
        raise ContractViolation(f"node {source} is not a source")
    if graph.roles[target] != NodeRole.TARGET:
        raise ContractViolation(f"node {target} is not a target")


def shortest_path(graph: NetworkGraph, source: int, target: int, seed: int = 0) -> Path:
    """Minimum-hop directed path; equal-length alternatives resolved by ``seed``."""
    _check_endpoints(graph, source, target)
    adj = shuffled_successors(graph, seed)
    parent = _bfs_parents(adj.indptr, adj.indices, source)
    if parent[target] < 0:
        raise RoutingError(f"target {target} unreachable from source {source}")
    return Path(_walk_back(parent, source, target))


@dataclass(frozen=True)
class RoutingTable:
    paths: tuple[Path, ...]
    next_hop: dict[tuple[int, int], int]

    def __len__(self):
        return len(self.next_hop)

    def lookup(self, node: int, flow_id: int) -> int:
        return self.next_hop[(node, flow_id)]

    def mean_hop_count(self) -> float:
        return float(np.mean([p.hop_count for p in self.paths])) if self.paths else 0.0


def route_flows(
    graph: NetworkGraph, flows, seed: int = 0, adjacency: Adjacency | None = None
) -> list[Path]:
    """Paths for ``(source, target)`` pairs; one BFS per distinct source."""
    adj = adjacency if adjacency is not None else shuffled_successors(graph, seed)
    trees: dict[int, np.ndarray] = {}
    for flow_id, (s, t) in enumerate(flows):
        try:
            _check_endpoints(graph, s, t)
        except ContractViolation as exc:
            raise RoutingError(str(exc), flow_id=flow_id) from None
        if int(s) not in trees:
            trees[int(s)] = _bfs_parents(adj.indptr, adj.indices, int(s))
    paths = []
    for flow_id, (s, t) in enumerate(flows):
        parent = trees[int(s)]
        if parent[int(t)] < 0:
            raise RoutingError(f"target {t} unreachable from source {s}", flow_id=flow_id)
        paths.append(Path(_walk_back(parent, int(s), int(t))))
    return paths


def build_routing_table(graph: NetworkGraph, flows, seed: int = 0) -> RoutingTable:
    paths = route_flows(graph, flows, seed)
    next_hop = {}
    for flow_id, path in enumerate(paths):
        for u, v in path.edges:
            next_hop[(u, flow_id)] = v
    return RoutingTable(tuple(paths), next_hop)
