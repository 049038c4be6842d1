"""Exception types raised by the library."""


class CosseratError(Exception):
    """Base class for all library errors."""


class NonSe3Matrix(CosseratError, ValueError):
    pass


class DimensionMismatch(CosseratError, ValueError):
    pass


class PointOutsideRod(CosseratError, ValueError):
    pass


class SingularMass(CosseratError, ArithmeticError):
    """The generalized inertia failed to factor; this contradicts positive definiteness."""


class ModeMismatch(CosseratError, ValueError):
    pass


class StepUnderflow(CosseratError, ArithmeticError):
    pass


class NonFinite(CosseratError, ArithmeticError):
    pass


class WindowTooLong(CosseratError, ValueError):
    pass


class ScenarioError(CosseratError, ValueError):
    """Invalid scenario or sweep file."""
