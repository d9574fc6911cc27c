"""Hybrid execution: RK4 flows, per-edge jumps and runtime Lyapunov certificates.

Flow and jump sets overlap on ``mu_U == delta``; the engine always jumps there.
All edges in their jump set jump together, counting as one jump.
"""

from dataclasses import dataclass, field
import math
import time

import numpy as np

from . import _kernels as kn
from . import potential as pt
from .controller import lyapunov
from .errors import CertificateViolation, NotInJumpSet, NumericalDivergence
from .state import SwarmState

JUMP_SLACK = 1e-9
FLOW_SLACK = 1e-8
CONSISTENCY_TOL = 1e-6


def in_jump_set(Xbar, theta, w, p):
    return pt.mu_U(Xbar, theta, w, p) >= p.delta


def in_flow_set(Xbar, theta, w, p):
    return pt.mu_U(Xbar, theta, w, p) <= p.delta


@dataclass
class HybridEvent:
    t: float
    j: int
    edges: tuple
    theta_before: tuple
    theta_after: tuple
    Vbar_before: float
    Vbar_after: float

    @property
    def decrease(self):
        return self.Vbar_before - self.Vbar_after


def _check_jump_certificate(event, sys_):
    need = sys_.gains.k_X * sys_.params.delta - JUMP_SLACK
    if event.decrease < need:
        raise CertificateViolation(
            f"jump lowered Vbar by {event.decrease:.6g} < k_X delta = {need:.6g}",
            event.t,
            event.j,
        )


def _apply_jumps(state, sys_, jumping=None):
    w, p = sys_.weight, sys_.params
    if jumping is None:
        jumping = [
            k for k in range(state.n_edges) if in_jump_set(state.edge_poses[k], state.thetas[k], w, p)
        ]
    if not jumping:
        raise NotInJumpSet("no edge is in its jump set", state.t, state.j)
    new = state.copy()
    for k in jumping:
        new.thetas[k] = pt.jump_g(state.edge_poses[k], state.thetas[k], w, p)
    new.j = state.j + 1
    event = HybridEvent(
        state.t,
        new.j,
        tuple(jumping),
        tuple(float(state.thetas[k]) for k in jumping),
        tuple(float(new.thetas[k]) for k in jumping),
        lyapunov(state, sys_).Vbar,
        lyapunov(new, sys_).Vbar,
    )
    return new, event


def do_jumps(state, sys_):
    """Reset theta on every edge in its jump set; poses and twists are kept.

    Returns the new state (j + 1) and the HybridEvent. Raises
    CertificateViolation if Vbar did not drop by at least k_X delta.
    """
    new, event = _apply_jumps(state, sys_)
    _check_jump_certificate(event, sys_)
    return new, event


class _Packed:
    """Kernel arguments for one closed loop."""

    def __init__(self, sys_):
        w, p, topo = sys_.weight, sys_.params, sys_.topo
        self.sys = sys_
        self.M, self.N = topo.n_edges, topo.n_agents
        self.edges = np.array(topo.edges, dtype=np.int64).reshape(self.M, 2)
        self.uc = np.ascontiguousarray(p.u_c)
        self.AA = np.ascontiguousarray(w.matrix)
        self.gamma = float(p.gamma)
        g = sys_.gains
        self.gains = np.array([g.k_X, g.k_xi, g.k_e, g.k_theta])
        self.J = np.array([I.J for I in sys_.inertias])
        self.Jinv = np.array([I.J_inv for I in sys_.inertias])
        self.mass = np.array([I.m for I in sys_.inertias])
        self.theta_set = np.array(p.theta_set)

    def step(self, y, h):
        return kn.rk4_step(
            y, h, self.edges, self.uc, self.AA, self.gamma, self.gains, self.J, self.Jinv, self.mass
        )

    def report(self, y):
        return kn.edge_report(y, self.M, self.N, self.uc, self.AA, self.gamma, self.theta_set)

    def kinetic(self, y):
        return kn.kinetic(y, self.M, self.N, self.J, self.mass)

    def vbar(self, y, report=None):
        rep = self.report(y) if report is None else report
        Ubar = float(rep[:, 0].sum())
        kin = self.kinetic(y)
        return self.sys.gains.k_X * Ubar + kin, Ubar, kin

    def controls(self, y):
        return kn.controls(y, self.edges, self.uc, self.AA, self.gamma, self.gains, self.N)

    def consistency(self, y):
        return kn.consistency(y, self.M, self.N, self.edges)

    def row(self, y, t, j):
        rep = self.report(y)
        vbar, ubar, kin = self.vbar(y, rep)
        out = np.empty(kn.n_columns(self.M, self.N))
        kn.fill_row(out, y, t, j, self.M, self.N, rep, self.controls(y), vbar, ubar, kin)
        return out

    def to_state(self, y, t, j):
        Xbar, th, X, xi = kn.unpack(y, self.M, self.N)
        return SwarmState(Xbar, th, X, xi, t, j)


def step_flow(state, sys_, h):
    """One classical RK4 step of the closed-loop flow, rotations renormalized."""
    packed = _Packed(sys_)
    y = packed.step(kn.pack(state), h)
    if not np.all(np.isfinite(y)):
        raise NumericalDivergence("non-finite state after RK4 step", state.t, state.j)
    return packed.to_state(y, state.t + h, state.j)


def jump_budget(Vbar0, sys_):
    """Upper bound ceil(Vbar(0, 0) / (k_X delta)) on the number of jumps."""
    return int(math.ceil(Vbar0 / (sys_.gains.k_X * sys_.params.delta)))


def trace_columns(M, N):
    cols = ["t", "j"]
    for name in ("theta", "muU", "U", "rotErr", "posErr", "grad"):
        cols += [f"{name}_{k + 1}" for k in range(M)]
    for i in range(N):
        cols += [f"omega_{i + 1}{a}" for a in "xyz"]
        cols += [f"v_{i + 1}{a}" for a in "xyz"]
    for i in range(N):
        cols += [f"tau_{i + 1}{a}" for a in "xyz"]
        cols += [f"f_{i + 1}{a}" for a in "xyz"]
    return cols + ["Vbar", "Ubar", "kinetic"]


@dataclass
class Trace:
    columns: list
    rows: np.ndarray
    events: list
    final_state: SwarmState
    converged: bool
    Vbar0: float
    budget: int
    max_flow_increase: float
    max_consistency: float
    violations: list = field(default_factory=list)
    wall_time: float = 0.0
    disable_jumps: bool = False
    jump_need: float = 0.0  # k_X delta

    @property
    def jumps(self):
        return self.final_state.j

    @property
    def certificates_ok(self):
        return not self.violations

    @property
    def jump_slack(self):
        """Smallest (Vbar decrease - k_X delta) over all jumps; nan without jumps."""
        return min((e.decrease - self.jump_need for e in self.events), default=math.nan)

    @property
    def consistent(self):
        """Integrated edge poses agree with the co-integrated agent poses."""
        return self.max_consistency < CONSISTENCY_TOL

    def column(self, name):
        return self.rows[:, self.columns.index(name)]

    def block(self, prefix):
        idx = [i for i, c in enumerate(self.columns) if c.split("_")[0] == prefix]
        return self.rows[:, idx]

    @property
    def status(self):
        if self.converged:
            return "converged"
        if self.stalled:
            return "stalled"
        return "not converged"

    @property
    def stalled(self):
        """Still away from synchronization with (numerically) vanishing gradients."""
        if self.converged:
            return False
        t = self.rows[:, 0]
        tail = t >= t[-1] - 5.0
        return bool(np.max(self.block("grad")[tail]) < 1e-8)


def simulate(
    sys_,
    state,
    h=1e-3,
    t_end=30.0,
    eps_sync=1e-3,
    sample_dt=1e-2,
    disable_jumps=False,
    strict=True,
    stop_at_sync=True,
):
    """Run the hybrid closed loop from ``state`` and return a Trace.

    Jumps are checked after every flow step. With ``strict`` any certificate
    failure raises CertificateViolation; otherwise it is recorded in
    ``trace.violations``.
    """
    wall0 = time.perf_counter()
    packed = _Packed(sys_)
    p = sys_.params
    k_X = sys_.gains.k_X
    M, N = packed.M, packed.N
    y = kn.pack(state)
    t0, j = float(state.t), int(state.j)
    if not np.all(np.isfinite(y)):
        raise NumericalDivergence("non-finite initial state", t0, j)

    Vbar0 = packed.vbar(y)[0]
    budget = jump_budget(Vbar0, sys_)
    chunks = [packed.row(y, t0, j)[None, :]]
    buf = np.empty((4096, kn.n_columns(M, N)))
    stats = np.array([-np.inf, 0.0, 0.0])  # max increase, max consistency, last increase
    events = []
    violations = []
    every = max(1, int(round(sample_dt / h)))
    n_steps = int(math.ceil((t_end - t0) / h - 1e-9))
    step = 0
    last_jump_step = None
    converged = False

    def fail(message, t, j):
        if strict:
            raise CertificateViolation(message, t, j)
        violations.append((t, j, message))

    while True:
        code, step, n_rows = kn.flow(
            y, h, t0, step, n_steps, every, j, p.delta, eps_sync, FLOW_SLACK,
            not disable_jumps, stop_at_sync, packed.edges, packed.uc, packed.AA,
            packed.gamma, packed.gains, packed.J, packed.Jinv, packed.mass,
            packed.theta_set, buf, stats,
        )
        if n_rows:
            chunks.append(buf[:n_rows].copy())
        t = t0 + step * h
        if code == kn.RUN_FULL:
            continue
        if code == kn.RUN_NONFINITE:
            raise NumericalDivergence("non-finite state after RK4 step", t, j)
        if code == kn.RUN_FLOW_INCREASE:
            fail(f"Vbar rose by {stats[2]:.3g} during flow", t, j)
            continue
        if code == kn.RUN_JUMP:
            # back-to-back jumps are fine only at the initial time
            if last_jump_step == step and step > 0:
                fail("consecutive jumps without flow (Zeno)", t, j)
            jumping = [int(k) for k in np.flatnonzero(packed.report(y)[:, 1] >= p.delta)]
            new, event = _apply_jumps(packed.to_state(y, t, j), sys_, jumping)
            events.append(event)
            j = new.j
            if event.decrease < k_X * p.delta - JUMP_SLACK:
                fail(f"jump lowered Vbar by {event.decrease:.6g} < k_X delta", t, j)
            if j > budget:
                fail(f"jump count {j} exceeds budget {budget}", t, j)
            y[:] = kn.pack(new)
            last_jump_step = step
            chunks.append(packed.row(y, t, j)[None, :])
            continue
        converged = code == kn.RUN_SYNC
        break

    if not stop_at_sync:
        converged = bool(kn._synchronized(y, M, N, packed.report(y), eps_sync))
    rows = np.concatenate(chunks)
    if rows[-1, 0] != t or rows[-1, 1] != j:
        rows = np.vstack([rows, packed.row(y, t, j)])
    return Trace(
        trace_columns(M, N),
        rows,
        events,
        packed.to_state(y, t, j),
        converged,
        Vbar0,
        budget,
        float(stats[0]),
        float(stats[1]),
        violations,
        time.perf_counter() - wall0,
        disable_jumps,
        k_X * p.delta,
    )


def run(config):
    """Build a SimConfig and simulate it."""
    sys_, state = config.build()
    return simulate(
        sys_,
        state,
        h=config.h,
        t_end=config.t_end,
        eps_sync=config.eps_sync,
        sample_dt=config.sample_dt,
        disable_jumps=config.disable_jumps,
        strict=config.certificate_strictness == "strict",
    )
