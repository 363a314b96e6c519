"""Exception hierarchy shared by all solver and I/O modules."""


class CableNetError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ValidationError(CableNetError):
    """Bad parameters or malformed input files."""

    exit_code = 2


class DegenerateGeometryError(CableNetError):
    """A member collapsed to (numerically) zero length."""

    exit_code = 2


class CompressionError(CableNetError):
    """A cable cluster went into compression in taut mode."""

    exit_code = 3

    def __init__(self, cluster, tension):
        self.cluster = cluster
        self.tension = tension
        super().__init__(
            f"cluster {cluster!r} carries compression ({tension:.6g} N); "
            "cables cannot push (enable slack mode to clamp to zero)"
        )


class SingularStiffnessError(CableNetError):
    """Tangent stiffness is rank deficient at the current state."""

    exit_code = 3

    def __init__(self, null_dim, message=None):
        self.null_dim = null_dim
        super().__init__(
            message or f"singular tangent stiffness (null-space dimension {null_dim})"
        )


class ConvergenceError(CableNetError):
    """An iterative solver failed to reach its tolerance."""

    exit_code = 3

    def __init__(self, message, residual_history=None):
        self.residual_history = list(residual_history or [])
        super().__init__(message)


class UnstableStructureError(CableNetError):
    """Tangent stiffness is indefinite at an equilibrium state."""

    exit_code = 3

    def __init__(self, negative_count):
        self.negative_count = negative_count
        super().__init__(
            f"indefinite tangent stiffness: {negative_count} negative eigenvalue(s)"
        )


class InfeasiblePrestressError(CableNetError):
    """Prestress design produced compression or cannot reach the target."""

    exit_code = 3


class ControlDivergenceError(CableNetError):
    """Closed-loop tension feedback diverged or lost its gain."""

    exit_code = 4


class IntegrationError(CableNetError):
    """Time integration blew up."""

    exit_code = 3

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"integration unstable at step {step}")
