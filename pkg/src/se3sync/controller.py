"""Rigid-body dynamics and the distributed hybrid feedback (flow part).

These are the straightforward per-agent / per-edge reference versions. The
simulator uses compiled kernels (``se3sync._kernels``) that are tested against
the functions here.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import liegroup as lg
from . import potential as pt
from .errors import InvalidGains, InvalidInertia
from .network import incidence_B, relative_twist


@dataclass(frozen=True)
class Inertia:
    """Mass-inertia blkdiag(J, m I3) of one rigid body."""

    J: np.ndarray
    m: float

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        if J.shape != (3, 3) or not np.allclose(J, J.T, atol=1e-12):
            raise InvalidInertia("J must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(J)[0] <= 0:
            raise InvalidInertia("J must be positive definite")
        if not self.m > 0:
            raise InvalidInertia(f"mass must be positive, got {self.m}")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "m", float(self.m))

    @property
    def matrix(self):
        I6 = np.zeros((6, 6))
        I6[:3, :3] = self.J
        I6[3:, 3:] = self.m * np.eye(3)
        return I6

    @property
    def J_inv(self):
        return np.linalg.inv(self.J)


@dataclass(frozen=True)
class Gains:
    k_X: float
    k_xi: float
    k_e: float
    k_theta: float

    def __post_init__(self):
        for name in ("k_X", "k_xi", "k_e", "k_theta"):
            if not getattr(self, name) > 0:
                raise InvalidGains(f"{name} must be positive")


@dataclass(frozen=True)
class ClosedLoop:
    """Everything the feedback needs besides the state."""

    topo: object
    weight: pt.WeightMatrix
    params: pt.SynergyParams
    gains: Gains
    inertias: tuple

    def __post_init__(self):
        if len(self.inertias) != self.topo.n_agents:
            raise InvalidInertia("need one inertia per agent")


def edge_gradients(state, sys):
    """Stacked (M, 6) pose gradients and (M,) theta gradients."""
    w, p = sys.weight, sys.params
    gX = np.array([pt.grad_pose(X, th, w, p) for X, th in zip(state.edge_poses, state.thetas)])
    gT = np.array([pt.grad_theta(X, th, w, p) for X, th in zip(state.edge_poses, state.thetas)])
    return gX.reshape(-1, 6), gT


def control_input(i, state, sys, grads=None):
    """u_i = -k_X sum_k Bbar_ik psi_nabla_k - k_xi xi_i - k_e sum_j (xi_i - xi_j).

    Only edges incident to ``i`` contribute. For edges where ``i`` is the
    negative end the block is ``-Ad_{Xbar_k}^{-T}``.
    """
    g = sys.gains
    topo = sys.topo
    gX = edge_gradients(state, sys)[0] if grads is None else grads
    u = np.zeros(6)
    for k in topo.plus_edges[i]:
        u -= g.k_X * gX[k]
    for k in topo.minus_edges[i]:
        u += g.k_X * lg.adjoint_inv(state.edge_poses[k]).T @ gX[k]
    xi = state.twists
    u -= g.k_xi * xi[i]
    for j in topo.neighbors[i]:
        u -= g.k_e * (xi[i] - xi[j])
    return u


def control_inputs(state, sys):
    grads = edge_gradients(state, sys)[0]
    return np.array([control_input(i, state, sys, grads) for i in range(sys.topo.n_agents)])


def body_accel(inertia, xi, u):
    """xi_dot = II^{-1} (ad_xi^T II xi + u)."""
    xi = np.asarray(xi, dtype=float)
    I6 = inertia.matrix
    rhs = lg.ad_small(xi).T @ I6 @ xi + u
    return np.concatenate([inertia.J_inv @ rhs[:3], rhs[3:] / inertia.m])


class Derivative(NamedTuple):
    edge_poses: np.ndarray
    thetas: np.ndarray
    poses: np.ndarray
    twists: np.ndarray


def flow_field(state, sys):
    """Closed-loop vector field on the flow set."""
    topo = sys.topo
    gX, gT = edge_gradients(state, sys)
    dXbar = np.empty_like(state.edge_poses)
    for k, (i, j) in enumerate(topo.edges):
        Xbar = state.edge_poses[k]
        dXbar[k] = Xbar @ lg.wedge(relative_twist(state.twists[i], state.twists[j], Xbar))
    dtheta = -sys.gains.k_theta * gT
    dX = np.array([X @ lg.wedge(xi) for X, xi in zip(state.poses, state.twists)])
    dxi = np.empty_like(state.twists)
    for i in range(topo.n_agents):
        u = control_input(i, state, sys, gX)
        dxi[i] = body_accel(sys.inertias[i], state.twists[i], u)
    return Derivative(dXbar, dtheta, dX, dxi)


class Lyapunov(NamedTuple):
    Vbar: float
    Ubar: float
    kinetic: float


def lyapunov(state, sys):
    """Vbar = k_X sum_k U(Xbar_k, theta_k) + sum_i xi_i^T II_i xi_i."""
    w, p = sys.weight, sys.params
    Ubar = sum(pt.potential_U(X, th, w, p) for X, th in zip(state.edge_poses, state.thetas))
    kinetic = sum(float(xi @ I.matrix @ xi) for xi, I in zip(state.twists, sys.inertias))
    return Lyapunov(sys.gains.k_X * Ubar + kinetic, float(Ubar), kinetic)


def vbar_rate(state, sys):
    """Predicted dVbar/dt on the flow set:
    -k_X k_theta |grad_theta|^2 - 2 k_xi |xi|^2 - 2 k_e |(B^T kron I6) xi|^2.
    """
    g = sys.gains
    _, gT = edge_gradients(state, sys)
    xi = state.twists
    rel = incidence_B(sys.topo).T @ xi
    return float(
        -g.k_X * g.k_theta * gT @ gT
        - 2 * g.k_xi * np.sum(xi * xi)
        - 2 * g.k_e * np.sum(rel * rel)
    )
