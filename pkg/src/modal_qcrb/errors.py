"""Exception types raised by the library."""


class ModalQcrbError(Exception):
    """Base class for all library errors."""


class GridMismatchError(ModalQcrbError):
    """Two modes that should share a sample grid do not."""


class StructuralError(ModalQcrbError):
    """An input violates a structural contract (shape, symmetry, basis)."""


class RankDeficiencyError(ModalQcrbError):
    """A mode set is linearly dependent within the rank tolerance."""

    def __init__(self, index: int, pivot: float):
        self.index = index
        self.pivot = pivot
        super().__init__(
            f"mode {index} is linearly dependent on its predecessors "
            f"(pivot norm {pivot:.3e} below rank tolerance)"
        )


class EvaluationError(ModalQcrbError):
    """A mode evaluation produced non-finite samples."""


class CutoffError(ModalQcrbError):
    """The Fock-space truncation cannot hold the requested state."""

    def __init__(self, message: str, suggested_cutoff: int | None = None):
        self.suggested_cutoff = suggested_cutoff
        if suggested_cutoff is not None:
            message = f"{message} (suggested per-mode cutoff: {suggested_cutoff})"
        super().__init__(message)


class GridResolutionError(ModalQcrbError):
    """The sample grid is too coarse to resolve the mode family."""


class PreconditionError(ModalQcrbError):
    """An operation's physical precondition is violated."""


class ConfigError(ModalQcrbError):
    """A run configuration is invalid; the message names the field."""
