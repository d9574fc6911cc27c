"""Independent numerical checks of the closed-form machinery.

Each oracle recomputes a quantity by a different route (power series, finite
differences, dense linear algebra, the scalar switching formula) and reports
the worst discrepancy against a tolerance.
"""

from typing import NamedTuple

import numpy as np

from . import liegroup as lg
from . import potential as pt
from .config import random_rotation
from .errors import OracleFailure
from .network import build_topology, incidence_Bbar, numerical_rank

EXP_TOL = 1e-9
GRAD_TOL = 1e-5
GRAD_EPS = 1e-6
RANK_TOL = 1e-9
CHAIN_TOL = 1e-9


class OracleReport(NamedTuple):
    name: str
    worst: float
    tol: float
    ok: bool
    lines: list

    def text(self):
        head = f"{self.name}: worst {self.worst:.3e} (tol {self.tol:.1e}) {'ok' if self.ok else 'FAIL'}"
        return "\n".join([head] + [f"  {line}" for line in self.lines])

    def require(self):
        if not self.ok:
            raise OracleFailure(self.text())
        return self


def series_exp(M, terms=20):
    """Matrix exponential from the truncated power series.

    The argument is scaled by 2^-s until its norm is below 1/2, the series is
    summed, and the result squared s times.
    """
    M = np.asarray(M, dtype=float)
    norm = np.linalg.norm(M, 1)
    s = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    A = M / 2.0**s
    out = np.eye(len(M))
    term = np.eye(len(M))
    for n in range(1, terms + 1):
        term = term @ A / n
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def random_pose(rng, box=2.0):
    return lg.pose(random_rotation(rng), rng.uniform(-box, box, size=3))


def exp_check(w, p, rng, samples=200):
    """Closed-form screw exponential against the series on |theta| <= pi."""
    worst = 0.0
    thetas = np.concatenate([[0.0, 1e-6, -1e-5, np.pi, -np.pi], rng.uniform(-np.pi, np.pi, samples)])
    for th in thetas:
        ref = series_exp(th * lg.wedge(p.u_c))
        worst = max(worst, float(np.max(np.abs(lg.screw_exp(th, p.u_c) - ref))))
    lines = [f"{len(thetas)} angles, u_c = {np.array2string(p.u_c, precision=4)}"]
    return OracleReport("exp", worst, EXP_TOL, worst < EXP_TOL, lines)


def _fd_gradients(X, th, w, p, eps):
    """Central differences of U along the six body twists and along theta."""
    g = np.empty(6)
    for a in range(6):
        e = np.zeros(6)
        e[a] = eps
        up = pt.potential_U(X @ series_exp(lg.wedge(e)), th, w, p)
        dn = pt.potential_U(X @ series_exp(lg.wedge(-e)), th, w, p)
        g[a] = (up - dn) / (2 * eps)
    gth = (pt.potential_U(X, th + eps, w, p) - pt.potential_U(X, th - eps, w, p)) / (2 * eps)
    return g, gth


def gradcheck(w, p, rng, samples=500, eps=GRAD_EPS, box=2.0):
    """Max normwise relative error of (2 psi_nabla, dU/dtheta) against finite differences.

    The error is |fd - closed| / max(|closed|, 1), so states with a vanishing
    gradient are judged in absolute terms.
    """
    worst_pose = worst_theta = 0.0
    for _ in range(samples):
        X = random_pose(rng, box)
        th = rng.uniform(-np.pi, np.pi)
        g, gth = _fd_gradients(X, th, w, p, eps)
        an = 2.0 * pt.grad_pose(X, th, w, p)
        an_th = pt.grad_theta(X, th, w, p)
        worst_pose = max(worst_pose, np.linalg.norm(g - an) / max(np.linalg.norm(an), 1.0))
        worst_theta = max(worst_theta, abs(gth - an_th) / max(abs(an_th), 1.0))
    worst = max(worst_pose, worst_theta)
    lines = [
        f"{samples} random states, eps = {eps:g}",
        f"pose gradient  {worst_pose:.3e}",
        f"theta gradient {worst_theta:.3e}",
    ]
    return OracleReport("gradcheck", float(worst), GRAD_TOL, worst < GRAD_TOL, lines)


def random_tree(rng, n):
    """Uniformly attached random tree with random edge orientation."""
    edges = []
    order = rng.permutation(n)
    for idx in range(1, n):
        a, b = int(order[idx]), int(order[rng.integers(idx)])
        edges.append((a, b) if rng.uniform() < 0.5 else (b, a))
    return build_topology(n, edges)


def rank_check(rng, sizes=range(2, 9), samples=50, box=5.0, topo=None):
    """Bbar has full column rank 6(N-1) for random poses on random trees."""
    worst_ratio = np.inf
    rank_ok = True
    lines = []
    for n in sizes if topo is None else [topo.n_agents]:
        ratio_n = np.inf
        for _ in range(samples):
            tp = random_tree(rng, n) if topo is None else topo
            rel = [random_pose(rng, box) for _ in range(tp.n_edges)]
            rep = numerical_rank(incidence_Bbar(tp, rel))
            rank_ok &= rep.rank == 6 * (n - 1)
            ratio_n = min(ratio_n, rep.ratio)
        lines.append(f"N={n}: min sigma_min/sigma_max = {ratio_n:.3e}")
        worst_ratio = min(worst_ratio, ratio_n)
    ok = bool(rank_ok and worst_ratio > RANK_TOL)
    return OracleReport("rank", float(worst_ratio), RANK_TOL, ok, lines)


class GapRow(NamedTuple):
    axis: int
    mu: float
    chain_residual: float
    delta_value: float


def gap_check(w, p):
    """Switching gap at every undesired critical point, plus the scalar chain.

    At the pi-rotation about eigenvector v, switching to theta' must satisfy
    U(X, theta') = U(X, 0) - 2 sin^2(theta'/2) Delta(v, u_c1) + gamma theta'^2 / 2.
    """
    crit = pt.enumerate_critical(w)
    rows = []
    for i, X in enumerate(crit.poses[1:]):
        v = crit.axes[i]
        D = pt.delta_of(v, p.u_c1, w)
        U0 = pt.potential_U(X, 0.0, w, p)
        resid = 0.0
        for tp in p.theta_set:
            pred = U0 - 2.0 * np.sin(tp / 2) ** 2 * D + 0.5 * p.gamma * tp * tp
            resid = max(resid, abs(pt.potential_U(X, tp, w, p) - pred))
        rows.append(GapRow(i + 1, pt.mu_U(X, 0.0, w, p), resid, D))
    worst_chain = max(r.chain_residual for r in rows)
    gap_ok = all(r.mu > p.delta for r in rows)
    lines = [
        f"v{r.axis}: mu_U = {r.mu:.6f} (delta {p.delta:g}), Delta = {r.delta_value:.6f}, "
        f"chain residual {r.chain_residual:.2e}"
        for r in rows
    ]
    ok = bool(gap_ok and worst_chain < CHAIN_TOL)
    return OracleReport("gap", float(worst_chain), CHAIN_TOL, ok, lines)
