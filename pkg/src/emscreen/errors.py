"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class MeshError(InvalidArgumentError):
    """Mesh topology or geometry is invalid."""


class SingularEvaluationError(ValueError):
    """A kernel or field was evaluated at (or too close to) its singularity."""


class ConditioningError(RuntimeError):
    """A linear system is numerically singular.

    Carries the estimated condition number in ``condition``.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DegenerateDataError(ValueError):
    """Input data violates a non-degeneracy hypothesis (e.g. vanishing far field)."""


class FileFormatError(ValueError):
    """A data file does not conform to its documented format."""
