"""SO(3)/SE(3) primitives with closed-form expressions.

Poses are plain 4x4 homogeneous numpy arrays, twists are 6-vectors
``xi = (omega, v)`` with the angular part first. Every function is pure and
returns a fresh array.
"""

import numpy as np

from .errors import InvalidAxis, MalformedTangent

ORTHO_TOL = 1e-9
AXIS_TOL = 1e-9
PATTERN_TOL = 1e-9
SMALL_ANGLE = 1e-4

I3 = np.eye(3)
I4 = np.eye(4)


def skew(w):
    """Return the 3x3 matrix ``w^x`` with ``w^x y = w x y``."""
    w0, w1, w2 = w
    return np.array([[0.0, -w2, w1], [w2, 0.0, -w0], [-w1, w0, 0.0]])


def unskew(S):
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def pose(R, p):
    """Assemble the homogeneous matrix T(R, p)."""
    X = np.eye(4)
    X[:3, :3] = R
    X[:3, 3] = p
    return X


def wedge(xi):
    """Map a twist (omega, v) to its 4x4 se(3) matrix."""
    xi = np.asarray(xi, dtype=float)
    M = np.zeros((4, 4))
    M[:3, :3] = skew(xi[:3])
    M[:3, 3] = xi[3:]
    return M


def vee(M, tol=PATTERN_TOL):
    """Inverse of :func:`wedge`.

    Raises MalformedTangent when the rotational block is not skew or the
    last row is not zero.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4):
        raise MalformedTangent(f"expected a 4x4 matrix, got shape {M.shape}")
    S = M[:3, :3]
    if np.max(np.abs(S + S.T)) > tol or np.max(np.abs(M[3])) > tol:
        raise MalformedTangent("matrix is not in se(3)")
    return np.concatenate([unskew(S), M[:3, 3]])


def psi(A):
    """Skew part of a 3x3 matrix as a vector: <<A, y^x>> = 2 y^T psi(A)."""
    return 0.5 * np.array([A[2, 1] - A[1, 2], A[0, 2] - A[2, 0], A[1, 0] - A[0, 1]])


def psi_bar(M):
    """6-vector (psi(top-left block), top-right column / 2) of a 4x4 matrix."""
    return np.concatenate([psi(M[:3, :3]), 0.5 * M[:3, 3]])


def adjoint(X):
    """Ad_X = [[R, 0], [p^x R, R]]."""
    R, p = X[:3, :3], X[:3, 3]
    Ad = np.zeros((6, 6))
    Ad[:3, :3] = R
    Ad[3:, 3:] = R
    Ad[3:, :3] = skew(p) @ R
    return Ad


def adjoint_inv(X):
    """Ad_X^{-1} = Ad_{X^{-1}} without a matrix inverse."""
    R, p = X[:3, :3], X[:3, 3]
    Ad = np.zeros((6, 6))
    Ad[:3, :3] = R.T
    Ad[3:, 3:] = R.T
    Ad[3:, :3] = -R.T @ skew(p)
    return Ad


def ad_small(xi):
    """ad_xi = [[omega^x, 0], [v^x, omega^x]]."""
    xi = np.asarray(xi, dtype=float)
    W = skew(xi[:3])
    ad = np.zeros((6, 6))
    ad[:3, :3] = W
    ad[3:, 3:] = W
    ad[3:, :3] = skew(xi[3:])
    return ad


def _check_unit(u, tol=AXIS_TOL):
    u = np.asarray(u, dtype=float)
    if u.shape != (3,) or abs(np.linalg.norm(u) - 1.0) > tol:
        raise InvalidAxis(f"rotation axis must be a unit 3-vector, got {u!r}")
    return u


def rot_angle_axis(theta, u):
    """Rodrigues formula R_a(theta, u) = I + sin(theta) u^x + (1 - cos(theta)) (u^x)^2."""
    u = _check_unit(u)
    K = skew(u)
    return I3 + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def _u_map_coeffs(theta):
    # (1 - cos t)/t and (t - sin t)/t, Taylor-expanded near zero
    if abs(theta) < SMALL_ANGLE:
        t2 = theta * theta
        return theta / 2.0 - theta * t2 / 24.0, t2 / 6.0 - t2 * t2 / 120.0
    return (1.0 - np.cos(theta)) / theta, (theta - np.sin(theta)) / theta


def u_map(theta, u):
    """Left Jacobian of SO(3) along a unit axis: U(theta u^x)."""
    K = skew(_check_unit(u))
    c1, c2 = _u_map_coeffs(theta)
    return I3 + c1 * K + c2 * (K @ K)


def screw_exp(theta, u_c):
    """Closed-form exp(theta u_c^) for u_c = (u_c1, u_c2) with unit u_c1."""
    u_c = np.asarray(u_c, dtype=float)
    u1, u2 = _check_unit(u_c[:3]), u_c[3:]
    return pose(rot_angle_axis(theta, u1), u_map(theta, u1) @ (theta * u2))


def compose(X, Y):
    return X @ Y


def inverse(X):
    """Group inverse T(R^T, -R^T p)."""
    R, p = X[:3, :3], X[:3, 3]
    return pose(R.T, -R.T @ p)


def project_rotation(M):
    """Nearest rotation matrix (Frobenius) to a 3x3 matrix, via SVD."""
    U, _, Vt = np.linalg.svd(M)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt))
    return U @ D @ Vt


def renormalize(X):
    """Polar-project the rotation block of a pose; translation is untouched."""
    Y = np.array(X, dtype=float)
    Y[:3, :3] = project_rotation(Y[:3, :3])
    Y[3] = (0.0, 0.0, 0.0, 1.0)
    return Y


def is_rotation(R, tol=ORTHO_TOL):
    R = np.asarray(R)
    return (
        np.linalg.norm(R.T @ R - I3) <= tol and abs(np.linalg.det(R) - 1.0) <= tol
    )


def is_pose(X, tol=ORTHO_TOL):
    X = np.asarray(X)
    return (
        X.shape == (4, 4)
        and np.array_equal(X[3], [0.0, 0.0, 0.0, 1.0])
        and is_rotation(X[:3, :3], tol)
    )
