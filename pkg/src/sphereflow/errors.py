"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A precondition on user-supplied data was violated."""


class DomainMismatchError(ValidationError):
    """Two fields (or a field and an operator) live on different grids."""


class SpectrumCapError(ValidationError):
    """Eigendecomposition was requested for a grid above the configured size cap."""


class SolverError(RuntimeError):
    """An iterative solve failed (non-convergence, breakdown, or blow-up)."""


class InsufficientDataError(ValueError):
    """A fitting routine was given a series without a usable window."""


class SnapshotFormatError(ValueError):
    """A snapshot file is corrupt, truncated, or has the wrong magic/version."""
