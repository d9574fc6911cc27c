from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .network import edge_poses


class EdgeState(NamedTuple):
    rel_pose: np.ndarray
    theta: float


@dataclass
class SwarmState:
    """Hybrid state: per-edge (Xbar_k, theta_k), per-agent (X_i, xi_i), time (t, j).

    Arrays are stacked: ``edge_poses`` is (M, 4, 4), ``thetas`` (M,),
    ``poses`` (N, 4, 4) and ``twists`` (N, 6).
    """

    edge_poses: np.ndarray
    thetas: np.ndarray
    poses: np.ndarray
    twists: np.ndarray
    t: float = 0.0
    j: int = 0

    @classmethod
    def from_agents(cls, topo, poses, twists=None, thetas=None, t=0.0, j=0):
        poses = np.array(poses, dtype=float).reshape(topo.n_agents, 4, 4)
        if twists is None:
            twists = np.zeros((topo.n_agents, 6))
        if thetas is None:
            thetas = np.zeros(topo.n_edges)
        return cls(
            np.array(edge_poses(topo, poses)).reshape(topo.n_edges, 4, 4),
            np.array(thetas, dtype=float).reshape(topo.n_edges),
            poses,
            np.array(twists, dtype=float).reshape(topo.n_agents, 6),
            float(t),
            int(j),
        )

    @property
    def n_edges(self):
        return len(self.thetas)

    @property
    def n_agents(self):
        return len(self.twists)

    def edge(self, k):
        return EdgeState(self.edge_poses[k], float(self.thetas[k]))

    def copy(self):
        return replace(
            self,
            edge_poses=self.edge_poses.copy(),
            thetas=self.thetas.copy(),
            poses=self.poses.copy(),
            twists=self.twists.copy(),
        )
