"""Exception hierarchy.

Every error raised by the library derives from RayleighError so callers
(and the CLI exit-code mapping) can catch the whole family at once.
"""


class RayleighError(Exception):
    """Base class for all library errors."""


class ConfigError(RayleighError, ValueError):
    """Malformed or inconsistent run configuration."""


class ValidationError(RayleighError, ValueError):
    """Profile violates the wall conditions U(0)=0, U'(0)!=0."""


class DegenerateExtremumError(ValidationError):
    """A root of U' has |U''| below the non-degeneracy tolerance."""


class DuplicateExtremalVelocityError(ValidationError):
    """Two extremal layers share the same velocity."""


class NoRootError(RayleighError, ValueError):
    """Requested velocity is not attained on the bracket."""


class MultiRootError(RayleighError, ValueError):
    """U' changes sign inside the bracket, so the root is not unique."""


class ExtremalVelocityError(RayleighError, ValueError):
    """Real wave speed coincides with an extremal velocity."""


class TailError(RayleighError, ValueError):
    """Wave speed too close to the far-field velocity for exponential tails."""


class QuadratureError(RayleighError, ArithmeticError):
    """Adaptive integration failed (step underflow or budget exhausted)."""


class BranchError(RayleighError, ValueError):
    """Argument lies on the branch cut of the logarithm."""


class NoContractionError(RayleighError, ArithmeticError):
    """Fixed-point iteration failed to contract."""


class WindowError(RayleighError, ValueError):
    """Wave speed outside the window of the extremal frame."""


class PoleError(RayleighError, ZeroDivisionError):
    """Evaluation point coincides with a pole."""


class BoundaryZeroError(RayleighError, ArithmeticError):
    """Dispersion relation (nearly) vanishes on a cell boundary."""


class NonSimpleError(RayleighError, ArithmeticError):
    """Embedded eigenvalue is not simple."""


class EigenvalueError(RayleighError, ArithmeticError):
    """Wave speed is an eigenvalue, so the Green's function has a pole."""


class ContourEigenvalueError(RayleighError, ArithmeticError):
    """An eigenvalue lies too close to the inversion contour."""


class StepError(RayleighError, ValueError):
    """Time step violates the stability bound."""


class ExtremalWindowError(RayleighError, ValueError):
    """Extremal window does not cover the singular band."""


class A3ViolationError(RayleighError, ArithmeticError):
    """Dispersion relation dips too low near an extremal velocity."""


class PoorFitError(RayleighError, ArithmeticError):
    """Power-law fit has coefficient of determination below threshold."""


class SupportError(RayleighError, ValueError):
    """Pole lies outside the sampled support."""
