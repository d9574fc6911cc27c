"""Weighted trace potentials on SE(3) x R and their synergistic switching data.

The weighting matrix ``AA = [[A, b], [b^T, d]]`` defines

    V(X)        = 1/2 tr((I - X) AA (I - X)^T)
    U(X, theta) = V(X exp(theta u_c^)) + gamma/2 theta^2

with ``u_c = (u_c1, -u_c1^x b / d)``. That choice of ``u_c2`` makes the
translational term of ``U`` independent of ``theta``, so switching ``theta``
only changes the rotational part and the gap below is explicit.
"""

from dataclasses import dataclass, field
from typing import NamedTuple
import warnings

import numpy as np

from . import liegroup as lg
from .errors import (
    DegenerateEigenspace,
    DegenerateWeight,
    InvalidScale,
    NoSynergyGap,
    NotPSD,
    SynergyWarning,
)

PSD_TOL = 1e-9
PD_TOL = 1e-9
CASE_TOL = 1e-9
GAP_TOL = 1e-9
TIE_RTOL = 1e-12

DEFAULT_THETA = (0.3 * np.pi,)
DEFAULT_MARGINS = (0.9, 0.75)


def _sorted_eigh(S):
    """Ascending eigenpairs with each eigenvector's largest-magnitude entry positive."""
    lam, V = np.linalg.eigh(S)
    order = np.argsort(lam, kind="stable")
    lam, V = lam[order], V[:, order]
    for i in range(3):
        if V[np.argmax(np.abs(V[:, i])), i] < 0:
            V[:, i] = -V[:, i]
    return lam, V


@dataclass(frozen=True)
class WeightMatrix:
    A: np.ndarray
    b: np.ndarray
    d: float
    W: np.ndarray = field(repr=False)
    Wbar: np.ndarray = field(repr=False)
    eigvals: np.ndarray = field(repr=False)
    eigvecs: np.ndarray = field(repr=False)

    @property
    def matrix(self):
        """The assembled symmetric 4x4 matrix."""
        M = np.empty((4, 4))
        M[:3, :3] = self.A
        M[:3, 3] = self.b
        M[3, :3] = self.b
        M[3, 3] = self.d
        return M

    @property
    def offset(self):
        """b / d, the translational offset that appears at critical points."""
        return self.b / self.d


def validate_weight(A, b, d):
    """Check and decompose a weighting matrix.

    ``A`` is symmetrized on input. Raises InvalidScale if ``d <= 0``, NotPSD if
    ``W = A - b b^T / d`` is indefinite and DegenerateWeight if
    ``Wbar = (tr(W) I - W) / 2`` is not positive definite.
    """
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)
    b = np.asarray(b, dtype=float).reshape(3)
    d = float(d)
    if not d > 0:
        raise InvalidScale(f"d must be positive, got {d}")
    W = A - np.outer(b, b) / d
    W = 0.5 * (W + W.T)
    lam, V = _sorted_eigh(W)
    if lam[0] < -PSD_TOL:
        raise NotPSD(f"W has eigenvalue {lam[0]:.3g} < 0")
    Wbar = 0.5 * (np.trace(W) * np.eye(3) - W)
    if np.linalg.eigvalsh(Wbar)[0] <= PD_TOL:
        raise DegenerateWeight("Wbar = (tr(W) I - W)/2 is not positive definite")
    return WeightMatrix(A, b, d, W, Wbar, lam, V)


@dataclass(frozen=True)
class SynergyParams:
    """Switching angles and gap constants for the modified potential U."""

    theta_set: tuple
    u_c1: np.ndarray
    u_c2: np.ndarray
    gamma: float
    delta: float
    delta_star: float
    case: int = 0

    @property
    def theta_max(self):
        return max(abs(t) for t in self.theta_set)

    @property
    def u_c(self):
        return np.concatenate([self.u_c1, self.u_c2])

    @property
    def gamma_bound(self):
        """Strict upper bound 4 Delta*/pi^2 on gamma."""
        return 4.0 * self.delta_star / np.pi**2

    @property
    def delta_bound(self):
        """Strict upper bound on the jump hysteresis delta."""
        return (self.gamma_bound - self.gamma) * self.theta_max**2 / 2.0


def delta_of(v, u_c1, w):
    """Decrease rate of U at the pi-rotation about ``v`` when switching along ``u_c1``.

    Delta(v, u) = u^T (tr(W) I - W - 2 v^T W v (I - v v^T)) u.
    """
    v = np.asarray(v, dtype=float)
    u = np.asarray(u_c1, dtype=float)
    W = w.W
    M = np.trace(W) * np.eye(3) - W - 2.0 * (v @ W @ v) * (np.eye(3) - np.outer(v, v))
    return float(u @ M @ u)


def _case_split(lam):
    l1, l2, l3 = lam
    if l2 - l1 <= CASE_TOL * (1.0 + abs(l3)):
        if l3 <= 0:
            raise NoSynergyGap("W vanishes; no rotational weighting")
        a3 = 1.0 - l2 / l3
        a12 = l2 / (2.0 * l3)
        return 1, np.array([a12, a12, a3]), l1 * (1.0 - l2 / l3)
    if l2 * (l3 - l1) >= l1 * l3:
        s = l2 + l3
        return 2, np.array([0.0, l2 / s, l3 / s]), l1
    s = 2.0 * (l1 * l2 + l1 * l3 + l2 * l3)
    pairs = np.array([l2 * l3, l1 * l3, l1 * l2])
    return 3, 1.0 - 4.0 * pairs / s, 4.0 * l1 * l2 * l3 / s


def synth_params(
    w,
    theta_set=None,
    margins=DEFAULT_MARGINS,
    *,
    gamma=None,
    delta=None,
    u_c1=None,
):
    """Construct synergy parameters for a validated weighting matrix.

    The warping axis ``u_c1`` is built from the eigenvectors of ``W`` following
    the three eigenvalue cases (repeated smallest eigenvalue, large middle
    eigenvalue, and the generic remainder). ``gamma`` and ``delta`` are placed
    strictly inside their admissible intervals using ``margins = (c_gamma,
    c_delta)``.

    Explicit ``gamma``, ``delta`` or ``u_c1`` override the synthesized values.
    Overrides that break a strict inequality emit a SynergyWarning instead of
    raising, so externally chosen parameter sets can be run as given.
    """
    if theta_set is None:
        theta_set = DEFAULT_THETA
    theta_set = tuple(float(t) for t in theta_set)
    if not theta_set:
        raise ValueError("theta_set must be nonempty")
    for t in theta_set:
        if not 0.0 < abs(t) <= np.pi:
            raise ValueError(f"switching angle {t} outside 0 < |theta| <= pi")
    c_gamma, c_delta = margins
    if not (0.0 < c_gamma < 1.0 and 0.0 < c_delta < 1.0):
        raise ValueError("margins must lie in (0, 1)")

    case, alpha_sq, delta_star = _case_split(w.eigvals)
    if delta_star <= GAP_TOL:
        raise NoSynergyGap(f"Delta_W* = {delta_star:.3g} is not positive")
    alpha = np.sqrt(np.clip(alpha_sq, 0.0, None))
    u = w.eigvecs @ alpha
    u = u / np.linalg.norm(u)

    gaps = [delta_of(w.eigvecs[:, i], u, w) for i in range(3)]
    if min(gaps) < delta_star - GAP_TOL:
        raise NoSynergyGap(
            f"synthesized axis gives min Delta = {min(gaps):.6g} < Delta* = {delta_star:.6g}"
        )

    overridden = False
    if u_c1 is not None:
        u = lg._check_unit(np.asarray(u_c1, dtype=float) / np.linalg.norm(u_c1))
        delta_star = min(delta_of(w.eigvecs[:, i], u, w) for i in range(3))
        overridden = True
        if delta_star <= 0:
            raise NoSynergyGap(f"override u_c1 gives Delta* = {delta_star:.3g} <= 0")

    u2 = -lg.skew(u) @ w.offset
    theta_m = max(abs(t) for t in theta_set)
    g_bound = 4.0 * delta_star / np.pi**2
    if gamma is None:
        gamma = c_gamma * g_bound
    else:
        overridden = True
    if delta is None:
        delta = c_delta * max(g_bound - gamma, 0.0) * theta_m**2 / 2.0
    else:
        overridden = True
    gamma, delta = float(gamma), float(delta)
    if gamma <= 0 or delta <= 0:
        raise ValueError("gamma and delta must be positive")

    params = SynergyParams(theta_set, u, u2, gamma, delta, float(delta_star), case)
    if overridden:
        problems = check_params(params)
        if problems:
            warnings.warn("; ".join(problems), SynergyWarning, stacklevel=2)
    return params


def check_params(p):
    """List the strict gap inequalities that ``p`` violates (empty if none)."""
    out = []
    if not p.gamma < p.gamma_bound:
        out.append(f"gamma={p.gamma:.6g} is not < 4 Delta*/pi^2 = {p.gamma_bound:.6g}")
    if not p.delta < p.delta_bound:
        out.append(
            f"delta={p.delta:.6g} is not < (4 Delta*/pi^2 - gamma) theta_M^2/2 = {p.delta_bound:.6g}"
        )
    return out


def potential_V(Xbar, w):
    """V(X) = 1/2 tr((I - X) AA (I - X)^T)."""
    E = np.eye(4) - Xbar
    return 0.5 * float(np.trace(E @ w.matrix @ E.T))


def potential_V_split(Xbar, w):
    """Same value as :func:`potential_V`, via the rotation/translation split."""
    R, p = Xbar[:3, :3], Xbar[:3, 3]
    E = np.eye(3) - R
    r = p - E @ w.offset
    return 0.5 * float(np.trace(E @ w.W @ E.T)) + 0.5 * w.d * float(r @ r)


def warp(theta, p):
    """T_{u_c}(theta) = exp(theta u_c^)."""
    return lg.screw_exp(theta, p.u_c)


def potential_U(Xbar, theta, w, p):
    """U(X, theta) = V(X T_{u_c}(theta)) + gamma/2 theta^2."""
    return potential_V(Xbar @ warp(theta, p), w) + 0.5 * p.gamma * theta * theta


def potential_U_split(Xbar, theta, w, p):
    """Explicit form of U; the translational term does not depend on theta."""
    R, pos = Xbar[:3, :3], Xbar[:3, 3]
    r = pos - (np.eye(3) - R) @ w.offset
    rot = np.trace(w.W @ (np.eye(3) - R @ lg.rot_angle_axis(theta, p.u_c1)))
    return float(rot) + 0.5 * p.gamma * theta * theta + 0.5 * w.d * float(r @ r)


def _psi_core(Xbar, theta, w, p):
    T = warp(theta, p)
    Gamma_inv = lg.inverse(Xbar @ T)
    return T, lg.psi_bar((np.eye(4) - Gamma_inv) @ w.matrix)


def grad_pose(Xbar, theta, w, p):
    """Left-trivialized pose gradient psi_nabla(X, theta) in R^6.

    Satisfies d/de U(X exp(e x^), theta) at e = 0 equal to 2 x^T psi_nabla.
    """
    T, core = _psi_core(Xbar, theta, w, p)
    return lg.adjoint_inv(T).T @ core


def grad_theta(Xbar, theta, w, p):
    """dU/dtheta = gamma theta + 2 u_c^T psi_bar((I - Gamma^{-1}) AA)."""
    _, core = _psi_core(Xbar, theta, w, p)
    return p.gamma * theta + 2.0 * float(p.u_c @ core)


def mu_U(Xbar, theta, w, p):
    """How much U would drop by jumping to the best angle in theta_set."""
    best = min(potential_U(Xbar, t, w, p) for t in p.theta_set)
    return potential_U(Xbar, theta, w, p) - best


def jump_g(Xbar, theta, w, p):
    """Jump map: an angle in theta_set minimizing U(Xbar, .).

    Near-ties (relative 1e-12) go to the smallest |angle|, then to the
    positive one.
    """
    values = [(potential_U(Xbar, t, w, p), t) for t in p.theta_set]
    best = min(v for v, _ in values)
    tol = TIE_RTOL * (1.0 + abs(best))
    tied = [t for v, t in values if v <= best + tol]
    return min(tied, key=lambda t: (abs(t), -t))


class CriticalPoints(NamedTuple):
    poses: list
    axes: np.ndarray
    degenerate: bool


def enumerate_critical(w):
    """Identity plus the pi-rotations about each eigenvector of W.

    When eigenvalues repeat, the undesired critical set is a continuum; the
    computed eigenbasis is returned with ``degenerate=True`` and a
    DegenerateEigenspace warning.
    """
    lam = w.eigvals
    gaps = np.diff(lam)
    degenerate = bool(np.any(gaps <= CASE_TOL * (1.0 + abs(lam[-1]))))
    if degenerate:
        warnings.warn(
            f"W has repeated eigenvalues {lam}; returning a computed basis only",
            DegenerateEigenspace,
            stacklevel=2,
        )
    poses = [np.eye(4)]
    for i in range(3):
        R = lg.rot_angle_axis(np.pi, w.eigvecs[:, i])
        poses.append(lg.pose(R, (np.eye(3) - R) @ w.offset))
    return CriticalPoints(poses, w.eigvecs.T.copy(), degenerate)
