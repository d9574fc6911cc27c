"""Compiled closed-loop kernels on a packed state vector.

Layout of the flat state ``y`` (M edges, N agents)::

    [ Rbar (9M) | pbar (3M) | theta (M) | R (9N) | p (3N) | xi (6N) ]

Rotation blocks are row-major 3x3. The functions mirror
``controller.flow_field`` and ``potential`` exactly; tests compare the two.
Helpers work on flat 9-vectors and write into caller-provided buffers, so the
inner loops do not allocate.
"""

import numpy as np
from numba import njit

# flow() return codes
RUN_END = 0
RUN_JUMP = 1
RUN_SYNC = 2
RUN_FULL = 3
RUN_NONFINITE = 4
RUN_FLOW_INCREASE = 5

# scratch layout for one edge evaluation
_RT, _PT, _RG, _PG, _F = 0, 9, 12, 21, 24
_WS = 40


def offsets(M, N):
    o_rb = 0
    o_pb = o_rb + 9 * M
    o_th = o_pb + 3 * M
    o_ra = o_th + M
    o_pa = o_ra + 9 * N
    o_xi = o_pa + 3 * N
    return o_rb, o_pb, o_th, o_ra, o_pa, o_xi, o_xi + 6 * N


def n_columns(M, N):
    return 2 + 6 * M + 12 * N + 3


def pack(state):
    return np.concatenate(
        [
            state.edge_poses[:, :3, :3].reshape(-1),
            state.edge_poses[:, :3, 3].reshape(-1),
            state.thetas,
            state.poses[:, :3, :3].reshape(-1),
            state.poses[:, :3, 3].reshape(-1),
            state.twists.reshape(-1),
        ]
    )


def unpack(y, M, N):
    o_rb, o_pb, o_th, o_ra, o_pa, o_xi, _ = offsets(M, N)
    Xbar = np.zeros((M, 4, 4))
    Xbar[:, :3, :3] = y[o_rb:o_pb].reshape(M, 3, 3)
    Xbar[:, :3, 3] = y[o_pb:o_th].reshape(M, 3)
    Xbar[:, 3, 3] = 1.0
    X = np.zeros((N, 4, 4))
    X[:, :3, :3] = y[o_ra:o_pa].reshape(N, 3, 3)
    X[:, :3, 3] = y[o_pa:o_xi].reshape(N, 3)
    X[:, 3, 3] = 1.0
    return Xbar, y[o_th:o_ra].copy(), X, y[o_xi:].reshape(N, 6).copy()


@njit(cache=True)
def _warp(theta, uc, ws):
    """exp(theta uc^): rotation into ws[_RT:], translation into ws[_PT:]."""
    u0, u1, u2 = uc[0], uc[1], uc[2]
    w0, w1, w2 = uc[3], uc[4], uc[5]
    s, c = np.sin(theta), np.cos(theta)
    uu = u0 * u0 + u1 * u1 + u2 * u2
    oc = 1.0 - c
    # R = I + s K + (1 - c) K^2 with K = u^x, K^2 = u u^T - |u|^2 I
    d = 1.0 - oc * uu
    ws[_RT + 0] = d + oc * u0 * u0
    ws[_RT + 1] = -s * u2 + oc * u0 * u1
    ws[_RT + 2] = s * u1 + oc * u0 * u2
    ws[_RT + 3] = s * u2 + oc * u1 * u0
    ws[_RT + 4] = d + oc * u1 * u1
    ws[_RT + 5] = -s * u0 + oc * u1 * u2
    ws[_RT + 6] = -s * u1 + oc * u2 * u0
    ws[_RT + 7] = s * u0 + oc * u2 * u1
    ws[_RT + 8] = d + oc * u2 * u2
    # p = (theta I + (1 - c) K + (theta - s) K^2) w
    ts = theta - s
    uw = u0 * w0 + u1 * w1 + u2 * w2
    a = theta - ts * uu
    ws[_PT + 0] = a * w0 + oc * (u1 * w2 - u2 * w1) + ts * uw * u0
    ws[_PT + 1] = a * w1 + oc * (u2 * w0 - u0 * w2) + ts * uw * u1
    ws[_PT + 2] = a * w2 + oc * (u0 * w1 - u1 * w0) + ts * uw * u2


@njit(cache=True)
def _gamma(Rb, pb, theta, uc, ws):
    """Gamma = Xbar T(theta): rotation ws[_RG:], translation ws[_PG:]."""
    _warp(theta, uc, ws)
    for a in range(3):
        acc = pb[a]
        for b in range(3):
            ws[_RG + 3 * a + b] = (
                Rb[3 * a] * ws[_RT + b] + Rb[3 * a + 1] * ws[_RT + 3 + b] + Rb[3 * a + 2] * ws[_RT + 6 + b]
            )
            acc += Rb[3 * a + b] * ws[_PT + b]
        ws[_PG + a] = acc


@njit(cache=True)
def _trace_potential(ws, AA):
    # 1/2 tr(E AA E^T) with E = I - Gamma; the last row of E is zero
    total = 0.0
    for a in range(3):
        for b in range(4):
            eb = (1.0 if a == b else 0.0) - (ws[_RG + 3 * a + b] if b < 3 else ws[_PG + a])
            acc = 0.0
            for c in range(4):
                ec = (1.0 if a == c else 0.0) - (ws[_RG + 3 * a + c] if c < 3 else ws[_PG + a])
                acc += AA[b, c] * ec
            total += eb * acc
    return 0.5 * total


@njit(cache=True)
def _potential(Rb, pb, theta, uc, AA, gamma, ws):
    _gamma(Rb, pb, theta, uc, ws)
    return _trace_potential(ws, AA) + 0.5 * gamma * theta * theta


@njit(cache=True)
def _edge_eval(Rb, pb, theta, uc, AA, gamma, ws, out):
    """out[0] = U, out[1:7] = psi_nabla, out[7] = dU/dtheta."""
    _gamma(Rb, pb, theta, uc, ws)
    out[0] = _trace_potential(ws, AA) + 0.5 * gamma * theta * theta
    # F = top three rows of (I - Gamma^{-1}) AA, (I - Gamma^{-1}) = [[I - RG^T, RG^T pG], [0, 0]]
    for a in range(3):
        q = 0.0
        for b in range(3):
            q += ws[_RG + 3 * b + a] * ws[_PG + b]
        for c in range(4):
            acc = AA[a, c] + q * AA[3, c]
            for b in range(3):
                acc -= ws[_RG + 3 * b + a] * AA[b, c]
            ws[_F + 4 * a + c] = acc
    c10 = 0.5 * (ws[_F + 9] - ws[_F + 6])
    c11 = 0.5 * (ws[_F + 2] - ws[_F + 8])
    c12 = 0.5 * (ws[_F + 4] - ws[_F + 1])
    c20 = 0.5 * ws[_F + 3]
    c21 = 0.5 * ws[_F + 7]
    c22 = 0.5 * ws[_F + 11]
    # Ad_T^{-T} [c1; c2] = [RT c1 + pT x (RT c2); RT c2]
    for a in range(3):
        r0, r1, r2 = ws[_RT + 3 * a], ws[_RT + 3 * a + 1], ws[_RT + 3 * a + 2]
        out[1 + a] = r0 * c10 + r1 * c11 + r2 * c12
        out[4 + a] = r0 * c20 + r1 * c21 + r2 * c22
    p0, p1, p2 = ws[_PT], ws[_PT + 1], ws[_PT + 2]
    out[1] += p1 * out[6] - p2 * out[5]
    out[2] += p2 * out[4] - p0 * out[6]
    out[3] += p0 * out[5] - p1 * out[4]
    out[7] = gamma * theta + 2.0 * (
        uc[0] * c10 + uc[1] * c11 + uc[2] * c12 + uc[3] * c20 + uc[4] * c21 + uc[5] * c22
    )


@njit(cache=True)
def potential_U(Rb, pb, theta, uc, AA, gamma):
    return _potential(Rb.reshape(9), pb, theta, uc, AA, gamma, np.empty(_WS))


@njit(cache=True)
def _edge_terms(Rb, pb, theta, uc, AA, gamma):
    """U, psi_nabla (6,) and dU/dtheta for one edge."""
    out = np.empty(8)
    _edge_eval(Rb.reshape(9), pb, theta, uc, AA, gamma, np.empty(_WS), out)
    return out[0], out[1:7].copy(), out[7]


@njit(cache=True)
def _rhs_into(y, edges, uc, AA, gamma, gains, J, Jinv, mass, dy, u, ws, ev):
    """Fill dy with the flow field; u receives the full control inputs (N, 6)."""
    M = edges.shape[0]
    N = mass.shape[0]
    k_X, k_xi, k_e, k_th = gains[0], gains[1], gains[2], gains[3]
    o_pb = 9 * M
    o_th = o_pb + 3 * M
    o_ra = o_th + M
    o_pa = o_ra + 9 * N
    o_xi = o_pa + 3 * N
    for n in range(N):
        for a in range(6):
            u[n, a] = -k_xi * y[o_xi + 6 * n + a]
    for k in range(M):
        i = edges[k, 0]
        j = edges[k, 1]
        Rb = y[9 * k : 9 * k + 9]
        pb = y[o_pb + 3 * k : o_pb + 3 * k + 3]
        _edge_eval(Rb, pb, y[o_th + k], uc, AA, gamma, ws, ev)
        xi_i = y[o_xi + 6 * i : o_xi + 6 * i + 6]
        xi_j = y[o_xi + 6 * j : o_xi + 6 * j + 6]
        # relative twist xi_i - Ad_{Xbar}^{-1} xi_j, Ad^{-1} = [[R^T, 0], [-R^T p^x, R^T]]
        m0 = xi_j[3] - (pb[1] * xi_j[2] - pb[2] * xi_j[1])
        m1 = xi_j[4] - (pb[2] * xi_j[0] - pb[0] * xi_j[2])
        m2 = xi_j[5] - (pb[0] * xi_j[1] - pb[1] * xi_j[0])
        wb0 = xi_i[0] - (Rb[0] * xi_j[0] + Rb[3] * xi_j[1] + Rb[6] * xi_j[2])
        wb1 = xi_i[1] - (Rb[1] * xi_j[0] + Rb[4] * xi_j[1] + Rb[7] * xi_j[2])
        wb2 = xi_i[2] - (Rb[2] * xi_j[0] + Rb[5] * xi_j[1] + Rb[8] * xi_j[2])
        vb0 = xi_i[3] - (Rb[0] * m0 + Rb[3] * m1 + Rb[6] * m2)
        vb1 = xi_i[4] - (Rb[1] * m0 + Rb[4] * m1 + Rb[7] * m2)
        vb2 = xi_i[5] - (Rb[2] * m0 + Rb[5] * m1 + Rb[8] * m2)
        for a in range(3):
            r0, r1, r2 = Rb[3 * a], Rb[3 * a + 1], Rb[3 * a + 2]
            # (R w^)_{a, :} = (r1 w2 - r2 w1, r2 w0 - r0 w2, r0 w1 - r1 w0)
            dy[9 * k + 3 * a] = r1 * wb2 - r2 * wb1
            dy[9 * k + 3 * a + 1] = r2 * wb0 - r0 * wb2
            dy[9 * k + 3 * a + 2] = r0 * wb1 - r1 * wb0
            dy[o_pb + 3 * k + a] = r0 * vb0 + r1 * vb1 + r2 * vb2
        dy[o_th + k] = -k_th * ev[7]
        # Bbar_ik = I6, Bbar_jk = -Ad_{Xbar}^{-T} = -[[R, p^x R], [0, R]]
        for a in range(3):
            r0, r1, r2 = Rb[3 * a], Rb[3 * a + 1], Rb[3 * a + 2]
            ws[a] = r0 * ev[4] + r1 * ev[5] + r2 * ev[6]
            ws[3 + a] = r0 * ev[1] + r1 * ev[2] + r2 * ev[3]
        ws[3] += pb[1] * ws[2] - pb[2] * ws[1]
        ws[4] += pb[2] * ws[0] - pb[0] * ws[2]
        ws[5] += pb[0] * ws[1] - pb[1] * ws[0]
        for a in range(3):
            u[i, a] -= k_X * ev[1 + a]
            u[i, 3 + a] -= k_X * ev[4 + a]
            u[j, a] += k_X * ws[3 + a]
            u[j, 3 + a] += k_X * ws[a]
        for a in range(6):
            dv = xi_i[a] - xi_j[a]
            u[i, a] -= k_e * dv
            u[j, a] += k_e * dv
    for n in range(N):
        R = y[o_ra + 9 * n : o_ra + 9 * n + 9]
        w0, w1, w2 = y[o_xi + 6 * n], y[o_xi + 6 * n + 1], y[o_xi + 6 * n + 2]
        v0, v1, v2 = y[o_xi + 6 * n + 3], y[o_xi + 6 * n + 4], y[o_xi + 6 * n + 5]
        for a in range(3):
            r0, r1, r2 = R[3 * a], R[3 * a + 1], R[3 * a + 2]
            dy[o_ra + 9 * n + 3 * a] = r1 * w2 - r2 * w1
            dy[o_ra + 9 * n + 3 * a + 1] = r2 * w0 - r0 * w2
            dy[o_ra + 9 * n + 3 * a + 2] = r0 * w1 - r1 * w0
            dy[o_pa + 3 * n + a] = r0 * v0 + r1 * v1 + r2 * v2
        Jn = J[n]
        h0 = Jn[0, 0] * w0 + Jn[0, 1] * w1 + Jn[0, 2] * w2
        h1 = Jn[1, 0] * w0 + Jn[1, 1] * w1 + Jn[1, 2] * w2
        h2 = Jn[2, 0] * w0 + Jn[2, 1] * w1 + Jn[2, 2] * w2
        # J w x w + tau
        t0 = h1 * w2 - h2 * w1 + u[n, 0]
        t1 = h2 * w0 - h0 * w2 + u[n, 1]
        t2 = h0 * w1 - h1 * w0 + u[n, 2]
        Ji = Jinv[n]
        dy[o_xi + 6 * n] = Ji[0, 0] * t0 + Ji[0, 1] * t1 + Ji[0, 2] * t2
        dy[o_xi + 6 * n + 1] = Ji[1, 0] * t0 + Ji[1, 1] * t1 + Ji[1, 2] * t2
        dy[o_xi + 6 * n + 2] = Ji[2, 0] * t0 + Ji[2, 1] * t1 + Ji[2, 2] * t2
        # v x w + f/m
        dy[o_xi + 6 * n + 3] = v1 * w2 - v2 * w1 + u[n, 3] / mass[n]
        dy[o_xi + 6 * n + 4] = v2 * w0 - v0 * w2 + u[n, 4] / mass[n]
        dy[o_xi + 6 * n + 5] = v0 * w1 - v1 * w0 + u[n, 5] / mass[n]


@njit(cache=True)
def rhs(y, edges, uc, AA, gamma, gains, J, Jinv, mass):
    dy = np.empty_like(y)
    u = np.empty((mass.shape[0], 6))
    _rhs_into(y, edges, uc, AA, gamma, gains, J, Jinv, mass, dy, u, np.empty(_WS), np.empty(8))
    return dy


@njit(cache=True)
def controls(y, edges, uc, AA, gamma, gains, N):
    """Control inputs u_i = (tau_i, f_i), shape (N, 6)."""
    # inertia only enters the accelerations, which are discarded here
    eye = np.zeros((N, 3, 3))
    for n in range(N):
        for a in range(3):
            eye[n, a, a] = 1.0
    u = np.empty((N, 6))
    _rhs_into(y, edges, uc, AA, gamma, gains, eye, eye, np.ones(N), np.empty_like(y), u, np.empty(_WS), np.empty(8))
    return u


@njit(cache=True)
def _project(R, ws):
    """Replace the flat 3x3 block R by its polar factor.

    Newton-Schulz iteration when R is already close to orthonormal (the
    integrator case), SVD otherwise. Both converge to the same nearest
    rotation.
    """
    err = 0.0
    for a in range(3):
        for b in range(3):
            e = R[a] * R[b] + R[3 + a] * R[3 + b] + R[6 + a] * R[6 + b] - (1.0 if a == b else 0.0)
            err += e * e
    if not np.isfinite(err):
        return  # left for the caller's finiteness check
    if err < 1e-4:
        for _ in range(6):
            if err < 1e-32:
                return
            # R <- R (3I - R^T R) / 2
            for a in range(3):
                for b in range(3):
                    ws[3 * a + b] = -0.5 * (R[a] * R[b] + R[3 + a] * R[3 + b] + R[6 + a] * R[6 + b])
                ws[3 * a + a] += 1.5
            for a in range(3):
                r0, r1, r2 = R[3 * a], R[3 * a + 1], R[3 * a + 2]
                for b in range(3):
                    R[3 * a + b] = r0 * ws[b] + r1 * ws[3 + b] + r2 * ws[6 + b]
            err = 0.0
            for a in range(3):
                for b in range(3):
                    e = R[a] * R[b] + R[3 + a] * R[3 + b] + R[6 + a] * R[6 + b] - (1.0 if a == b else 0.0)
                    err += e * e
        return
    U, _, Vt = np.linalg.svd(R.reshape(3, 3).copy())
    D = np.eye(3)
    if np.linalg.det(U @ Vt) < 0:
        D[2, 2] = -1.0
    R[:] = (U @ D @ Vt).reshape(9)


@njit(cache=True)
def _renormalize(y, M, N, ws):
    o_ra = 13 * M
    for k in range(M):
        _project(y[9 * k : 9 * k + 9], ws)
    for n in range(N):
        _project(y[o_ra + 9 * n : o_ra + 9 * n + 9], ws)


@njit(cache=True)
def renormalize(y, M, N):
    _renormalize(y, M, N, np.empty(_WS))


@njit(cache=True)
def _rk4_into(y, h, edges, uc, AA, gamma, gains, J, Jinv, mass, K, tmp, u, ws, ev, out):
    """out <- one RK4 step from y, rotations renormalized. K is (4, len(y))."""
    n = y.shape[0]
    _rhs_into(y, edges, uc, AA, gamma, gains, J, Jinv, mass, K[0], u, ws, ev)
    for a in range(n):
        tmp[a] = y[a] + 0.5 * h * K[0, a]
    _rhs_into(tmp, edges, uc, AA, gamma, gains, J, Jinv, mass, K[1], u, ws, ev)
    for a in range(n):
        tmp[a] = y[a] + 0.5 * h * K[1, a]
    _rhs_into(tmp, edges, uc, AA, gamma, gains, J, Jinv, mass, K[2], u, ws, ev)
    for a in range(n):
        tmp[a] = y[a] + h * K[2, a]
    _rhs_into(tmp, edges, uc, AA, gamma, gains, J, Jinv, mass, K[3], u, ws, ev)
    for a in range(n):
        out[a] = y[a] + (h / 6.0) * (K[0, a] + 2.0 * K[1, a] + 2.0 * K[2, a] + K[3, a])
    _renormalize(out, edges.shape[0], mass.shape[0], ws)


@njit(cache=True)
def rk4_step(y, h, edges, uc, AA, gamma, gains, J, Jinv, mass):
    out = np.empty_like(y)
    _rk4_into(
        y, h, edges, uc, AA, gamma, gains, J, Jinv, mass,
        np.empty((4, y.shape[0])), np.empty_like(y), np.empty((mass.shape[0], 6)),
        np.empty(_WS), np.empty(8), out,
    )
    return out


@njit(cache=True)
def _report_into(y, M, uc, AA, gamma, theta_set, ws, ev, rep):
    o_pb = 9 * M
    o_th = o_pb + 3 * M
    for k in range(M):
        Rb = y[9 * k : 9 * k + 9]
        pb = y[o_pb + 3 * k : o_pb + 3 * k + 3]
        best = np.inf
        for t in theta_set:
            val = _potential(Rb, pb, t, uc, AA, gamma, ws)
            if val < best:
                best = val
        _edge_eval(Rb, pb, y[o_th + k], uc, AA, gamma, ws, ev)
        rot = 0.0
        for a in range(3):
            for b in range(3):
                e = (1.0 if a == b else 0.0) - Rb[3 * a + b]
                rot += e * e
        g = 0.0
        for a in range(1, 8):
            g += ev[a] * ev[a]
        rep[k, 0] = ev[0]
        rep[k, 1] = ev[0] - best
        rep[k, 2] = np.sqrt(g)
        rep[k, 3] = np.sqrt(rot)
        rep[k, 4] = np.sqrt(pb[0] * pb[0] + pb[1] * pb[1] + pb[2] * pb[2])


@njit(cache=True)
def edge_report(y, M, N, uc, AA, gamma, theta_set):
    """Per-edge U, mu_U, gradient norm, rotation error, translation norm."""
    rep = np.empty((M, 5))
    _report_into(y, M, uc, AA, gamma, theta_set, np.empty(_WS), np.empty(8), rep)
    return rep


@njit(cache=True)
def kinetic(y, M, N, J, mass):
    o_xi = 13 * M + 12 * N
    T = 0.0
    for n in range(N):
        w0, w1, w2 = y[o_xi + 6 * n], y[o_xi + 6 * n + 1], y[o_xi + 6 * n + 2]
        Jn = J[n]
        for a in range(3):
            T += (w0 * Jn[0, a] + w1 * Jn[1, a] + w2 * Jn[2, a]) * y[o_xi + 6 * n + a]
        for a in range(3, 6):
            T += mass[n] * y[o_xi + 6 * n + a] ** 2
    return T


@njit(cache=True)
def consistency(y, M, N, edges):
    """max_k |Xbar_k - X_j^-1 X_i|_F over all edges."""
    o_pb = 9 * M
    o_ra = 13 * M
    o_pa = o_ra + 9 * N
    worst = 0.0
    for k in range(M):
        i, j = edges[k, 0], edges[k, 1]
        Ri = y[o_ra + 9 * i : o_ra + 9 * i + 9]
        Rj = y[o_ra + 9 * j : o_ra + 9 * j + 9]
        err = 0.0
        for a in range(3):
            for b in range(3):
                rel = Rj[a] * Ri[b] + Rj[3 + a] * Ri[3 + b] + Rj[6 + a] * Ri[6 + b]
                e = rel - y[9 * k + 3 * a + b]
                err += e * e
            p = 0.0
            for c in range(3):
                p += Rj[3 * c + a] * (y[o_pa + 3 * i + c] - y[o_pa + 3 * j + c])
            e = p - y[o_pb + 3 * k + a]
            err += e * e
        worst = max(worst, np.sqrt(err))
    return worst


@njit(cache=True)
def fill_row(row, y, t, j, M, N, rep, u, vbar, ubar, kin):
    """One trace row; layout matches hybridsim.trace_columns."""
    o_th = 12 * M
    o_xi = 13 * M + 12 * N
    row[0] = t
    row[1] = j
    c = 2
    for k in range(M):
        row[c + k] = y[o_th + k]
    c += M
    for col in (1, 0, 3, 4, 2):
        for k in range(M):
            row[c + k] = rep[k, col]
        c += M
    for a in range(6 * N):
        row[c + a] = y[o_xi + a]
    c += 6 * N
    for n in range(N):
        for a in range(6):
            row[c + 6 * n + a] = u[n, a]
    c += 6 * N
    row[c] = vbar
    row[c + 1] = ubar
    row[c + 2] = kin


@njit(cache=True)
def _synchronized(y, M, N, rep, eps):
    o_th = 12 * M
    o_xi = 13 * M + 12 * N
    for k in range(M):
        # |I4 - Xbar|_F from rotation and translation errors
        if rep[k, 3] ** 2 + rep[k, 4] ** 2 >= eps * eps or abs(y[o_th + k]) >= eps:
            return False
    s = 0.0
    for a in range(6 * N):
        s += y[o_xi + a] ** 2
    return s < eps * eps


@njit(cache=True)
def flow(
    y, h, t0, step, n_steps, every, j, delta, eps, slack, jumps_on, stop_at_sync,
    edges, uc, AA, gamma, gains, J, Jinv, mass, theta_set, rows, stats,
):
    """Integrate the flow in place until something needs the caller.

    Returns (code, step, n_rows). ``stats`` holds [max Vbar increase, max
    consistency error, last increase]. Rows are written every ``every``
    steps into ``rows`` (time t0 + step h). Codes: RUN_END, RUN_JUMP (some
    mu_U >= delta), RUN_SYNC, RUN_FULL (row buffer), RUN_NONFINITE,
    RUN_FLOW_INCREASE (per-step Vbar rise above slack (1 + Vbar)).
    """
    M = edges.shape[0]
    N = mass.shape[0]
    n = y.shape[0]
    K = np.empty((4, n))
    tmp = np.empty(n)
    nxt = np.empty(n)
    u = np.empty((N, 6))
    ws = np.empty(_WS)
    ev = np.empty(8)
    rep = np.empty((M, 5))
    k_X = gains[0]
    _report_into(y, M, uc, AA, gamma, theta_set, ws, ev, rep)
    ubar = 0.0
    for k in range(M):
        ubar += rep[k, 0]
    vbar = k_X * ubar + kinetic(y, M, N, J, mass)
    n_rows = 0
    while True:
        if jumps_on:
            for k in range(M):
                if rep[k, 1] >= delta:
                    return RUN_JUMP, step, n_rows
        if stop_at_sync and _synchronized(y, M, N, rep, eps):
            return RUN_SYNC, step, n_rows
        if step >= n_steps:
            return RUN_END, step, n_rows
        if n_rows >= rows.shape[0]:
            return RUN_FULL, step, n_rows
        _rk4_into(y, h, edges, uc, AA, gamma, gains, J, Jinv, mass, K, tmp, u, ws, ev, nxt)
        for a in range(n):
            if not np.isfinite(nxt[a]):
                return RUN_NONFINITE, step + 1, n_rows
        y[:] = nxt
        step += 1
        _report_into(y, M, uc, AA, gamma, theta_set, ws, ev, rep)
        ubar = 0.0
        for k in range(M):
            ubar += rep[k, 0]
        kin = kinetic(y, M, N, J, mass)
        new = k_X * ubar + kin
        inc = new - vbar
        stats[0] = max(stats[0], inc)
        stats[1] = max(stats[1], consistency(y, M, N, edges))
        stats[2] = inc
        violated = inc > slack * (1.0 + vbar)
        vbar = new
        if step % every == 0 or violated:
            _rhs_into(y, edges, uc, AA, gamma, gains, J, Jinv, mass, K[0], u, ws, ev)
            fill_row(rows[n_rows], y, t0 + step * h, j, M, N, rep, u, vbar, ubar, kin)
            n_rows += 1
        if violated:
            return RUN_FLOW_INCREASE, step, n_rows
