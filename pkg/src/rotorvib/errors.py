"""Exception hierarchy shared by every rotorvib module.

Errors fall in two families: :class:`InputError` for data that cannot be
accepted as given (bad files, wrong units, wrong channel roles) and
:class:`ComputationError` for requests that are well formed but cannot be
carried out (unstable time step, singular matrices, too few revolutions).
The CLI maps the first family to exit code 3 and the second to exit code 4.
"""


class RotorVibError(Exception):
    """Base class for all library errors."""


class InputError(RotorVibError):
    pass


class ComputationError(RotorVibError):
    pass


class FormatError(InputError):
    pass


class DataError(InputError):
    pass


class UnitError(InputError):
    pass


class RoleError(InputError):
    pass


class LengthError(ComputationError):
    pass


class DomainError(ComputationError, ValueError):
    pass


class RangeError(ComputationError, ValueError):
    pass


class SymmetryError(ComputationError):
    pass


class MatrixError(ComputationError):
    pass


class StabilityError(ComputationError):
    pass


class SingularityError(ComputationError):
    pass


class InsufficientPulsesError(ComputationError):
    pass


class DropoutError(ComputationError):
    pass


class AliasingError(ComputationError):
    pass


class DegenerateOrbitError(ComputationError):
    pass


class CoverageError(ComputationError):
    pass


class OrderingError(ComputationError):
    pass
