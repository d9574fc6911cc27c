"""Interaction graphs, incidence matrices and relative motion.

Agents and edges are indexed from zero. Edge ``k = (i, j)`` has positive end
``i`` and negative end ``j``; its relative pose is ``X_j^{-1} X_i``.
"""

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import liegroup as lg
from .errors import AssumptionViolated, MalformedGraph

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class Topology:
    n_agents: int
    edges: tuple
    neighbors: tuple
    plus_edges: tuple
    minus_edges: tuple

    @property
    def n_edges(self):
        return len(self.edges)

    def edges_of(self, i):
        """All edges incident to agent ``i``, positive-end ones first."""
        return self.plus_edges[i] + self.minus_edges[i]


def build_topology(n_agents, edges):
    """Validate an oriented edge list and derive neighbor/edge sets.

    The undirected graph must be a tree. Raises MalformedGraph for self-loops,
    duplicates or bad indices and AssumptionViolated for cycles or
    disconnected graphs.
    """
    n = int(n_agents)
    if n < 2:
        raise AssumptionViolated("need at least two agents to synchronize")
    edges = tuple((int(i), int(j)) for i, j in edges)
    seen = set()
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise MalformedGraph(f"edge ({i}, {j}) references a missing agent")
        if i == j:
            raise MalformedGraph(f"self-loop at agent {i}")
        key = frozenset((i, j))
        if key in seen:
            raise MalformedGraph(f"duplicate edge between {i} and {j}")
        seen.add(key)

    neighbors = [[] for _ in range(n)]
    plus = [[] for _ in range(n)]
    minus = [[] for _ in range(n)]
    for k, (i, j) in enumerate(edges):
        neighbors[i].append(j)
        neighbors[j].append(i)
        plus[i].append(k)
        minus[j].append(k)

    reached = {0}
    queue = deque([0])
    while queue:
        for j in neighbors[queue.popleft()]:
            if j not in reached:
                reached.add(j)
                queue.append(j)
    if len(reached) != n:
        raise AssumptionViolated("interaction graph is disconnected")
    if len(edges) != n - 1:
        raise AssumptionViolated("interaction graph has a cycle")

    return Topology(
        n,
        edges,
        tuple(tuple(sorted(s)) for s in neighbors),
        tuple(tuple(s) for s in plus),
        tuple(tuple(s) for s in minus),
    )


def incidence_B(topo):
    B = np.zeros((topo.n_agents, topo.n_edges))
    for k, (i, j) in enumerate(topo.edges):
        B[i, k] = 1.0
        B[j, k] = -1.0
    return B


def incidence_Bbar(topo, rel_poses):
    """Dense 6N x 6M pose-dependent incidence matrix (for analysis only)."""
    N, M = topo.n_agents, topo.n_edges
    if len(rel_poses) != M:
        raise ValueError(f"expected {M} relative poses, got {len(rel_poses)}")
    Bbar = np.zeros((6 * N, 6 * M))
    for k, (i, j) in enumerate(topo.edges):
        Bbar[6 * i : 6 * i + 6, 6 * k : 6 * k + 6] = np.eye(6)
        Bbar[6 * j : 6 * j + 6, 6 * k : 6 * k + 6] = -lg.adjoint_inv(rel_poses[k]).T
    return Bbar


class RankReport(NamedTuple):
    rank: int
    sigma_min: float
    sigma_max: float

    @property
    def ratio(self):
        return self.sigma_min / self.sigma_max


def numerical_rank(M, rtol=RANK_RTOL):
    s = np.linalg.svd(M, compute_uv=False)
    return RankReport(int(np.sum(s > rtol * s[0])), float(s[-1]), float(s[0]))


def relative_pose(Xi, Xj):
    """X_j^{-1} X_i for an edge with positive end i and negative end j."""
    return lg.inverse(Xj) @ Xi


def relative_twist(xi_i, xi_j, Xbar):
    """xi_i - Ad_{Xbar}^{-1} xi_j."""
    return np.asarray(xi_i, float) - lg.adjoint_inv(Xbar) @ np.asarray(xi_j, float)


def edge_poses(topo, poses):
    return [relative_pose(poses[i], poses[j]) for i, j in topo.edges]


def laplacian(topo):
    B = incidence_B(topo)
    return B @ B.T
