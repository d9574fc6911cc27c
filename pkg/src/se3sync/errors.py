"""Exception and warning types shared across the package."""


class Se3SyncError(Exception):
    """Base class for all errors raised by se3sync."""


class MalformedTangent(Se3SyncError, ValueError):
    """A 4x4 matrix does not have the se(3) sparsity pattern."""


class InvalidAxis(Se3SyncError, ValueError):
    """A rotation axis is not a unit vector."""


class InvalidScale(Se3SyncError, ValueError):
    """The scalar block ``d`` of the weighting matrix is not positive."""


class NotPSD(Se3SyncError, ValueError):
    """``W = A - b b^T / d`` has a negative eigenvalue."""


class DegenerateWeight(Se3SyncError, ValueError):
    """``Wbar = (tr(W) I - W) / 2`` is not positive definite."""


class NoSynergyGap(Se3SyncError, ValueError):
    """The eigenstructure of ``W`` admits no positive synergy gap."""


class MalformedGraph(Se3SyncError, ValueError):
    """Self-loops, duplicate edges or out-of-range vertex indices."""


class AssumptionViolated(Se3SyncError, ValueError):
    """The interaction graph is not a tree (connected and acyclic)."""


class InvalidInertia(Se3SyncError, ValueError):
    """Mass or inertia tensor is not symmetric positive definite."""


class InvalidGains(Se3SyncError, ValueError):
    """A feedback gain is not strictly positive."""


class ConfigError(Se3SyncError, ValueError):
    """A simulation config is inconsistent or incomplete."""


class _HybridTimeError(Se3SyncError):
    def __init__(self, message, t=None, j=None):
        if t is not None:
            message = f"{message} (t={t:.6g}, j={j})"
        super().__init__(message)
        self.t = t
        self.j = j


class NotInJumpSet(_HybridTimeError):
    """A jump was requested but no edge is in its jump set."""


class CertificateViolation(_HybridTimeError):
    """A Lyapunov certificate failed at runtime."""


class NumericalDivergence(_HybridTimeError):
    """The integrated state became non-finite."""


class OracleFailure(Se3SyncError):
    """An on-demand numerical oracle exceeded its tolerance."""


class SynergyWarning(UserWarning):
    """User-supplied synergy parameters violate the strict gap inequalities."""


class DegenerateEigenspace(UserWarning):
    """``W`` has repeated eigenvalues, so its eigenvector set is a continuum."""
