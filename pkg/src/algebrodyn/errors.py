"""Exception hierarchy shared by all modules.

Numerical failures carry an optional ``context`` dict (operation, point,
branch) so the CLI can report where a pipeline broke.
"""


class AlgebrodynError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 3

    def __init__(self, message="", **context):
        self.context = {k: v for k, v in context.items() if v is not None}
        if self.context:
            extra = ", ".join(f"{k}={_fmt(v)}" for k, v in self.context.items())
            message = f"{message} [{extra}]" if message else extra
        super().__init__(message)


def _fmt(value):
    try:
        import numpy as np

        if isinstance(value, np.ndarray):
            return np.array2string(value, precision=6, separator=",")
    except ImportError:  # pragma: no cover
        pass
    return repr(value)


class ValidationError(AlgebrodynError, ValueError):
    exit_code = 2


# algebra
class NullDivisor(AlgebrodynError, ZeroDivisionError):
    """Element lies on the complex null cone (det ~ 0)."""


class NotHermitian(AlgebrodynError, ValueError):
    pass


# adiff
class NonCommutativeAlgebra(AlgebrodynError, ValueError):
    pass


class NumericalBreakdown(AlgebrodynError, ArithmeticError):
    pass


class NotFactorizable(AlgebrodynError):
    def __init__(self, message="", residual=None, **context):
        self.residual = residual
        super().__init__(message, residual=residual, **context)


class NotConformal(AlgebrodynError):
    def __init__(self, message="", residual=None, **context):
        self.residual = residual
        super().__init__(message, residual=residual, **context)


# twistor
class DegenerateAtPoint(AlgebrodynError):
    pass


class BranchCollision(AlgebrodynError):
    pass


class NoConvergence(AlgebrodynError):
    pass


class SingularJacobian(AlgebrodynError, ArithmeticError):
    pass


# fields
class OnSingularLocus(AlgebrodynError):
    pass


class LogPole(AlgebrodynError):
    pass


class StencilCrossesSingularity(AlgebrodynError):
    pass


class NotNull(AlgebrodynError, ValueError):
    pass


# catalog
class OnRing(AlgebrodynError):
    pass


class OnLocus(AlgebrodynError):
    pass


# singular
class DegenerateResultant(AlgebrodynError):
    pass


class EmptyLocus(AlgebrodynError):
    """No locus points found; informative rather than fatal."""


class SphereIntersectsLocus(AlgebrodynError):
    pass


# complexspace
class NotOrthogonal(AlgebrodynError, ValueError):
    pass


class IdenticallyNull(AlgebrodynError):
    pass
