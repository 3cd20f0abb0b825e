class SolverError(Exception):
    """Base class for every error raised by the package."""


class DimensionMismatchError(SolverError, ValueError):
    pass


class InvalidProfileError(SolverError, ValueError):
    pass


class ProfileSpaceTooLargeError(SolverError):
    pass


class InvalidParameterError(SolverError, ValueError):
    pass


class InfeasibleConstraintsError(SolverError):
    """No point of the player's simplex satisfies all of its constraints."""


class SlaterViolatedError(SolverError):
    pass


class UnsupportedConstraintError(SolverError, NotImplementedError):
    pass


class ConfigError(SolverError):
    pass


def get_dimension_exception(what: str, expected, got) -> DimensionMismatchError:
    return DimensionMismatchError(f"{what}: expected {expected}, got {got}")
