"""Exception hierarchy shared by every module of the package."""


class FSDiffusionError(Exception):
    """Base class for all errors raised by :mod:`fsdiffusion`."""


class DomainError(FSDiffusionError, ValueError):
    """An argument lies outside the domain of a function (e.g. ``x <= 0``)."""


class ParameterError(DomainError):
    """Invalid diffusion parameters."""


class MomentDivergenceError(DomainError):
    """A requested moment of the invariant law is infinite."""


class WindowError(DomainError):
    """An exponent or weight lies outside its admissible window.

    The message always names the violated inequality.
    """

    def __init__(self, message, inequality=None):
        super().__init__(message)
        self.inequality = inequality


class StabilityError(DomainError):
    """Step size violates the ``theta * dt < 0.5`` guard."""


class NumericalDegeneracyError(FSDiffusionError, ArithmeticError):
    """An estimator hit a degenerate configuration."""


class NegativeLogArgument(NumericalDegeneracyError):
    """``R(t) / Var`` is outside ``(0, 1)`` so the rate estimate is undefined."""


class DegenerateDenominator(NumericalDegeneracyError):
    """A method-of-moments denominator vanished."""


class MeanAtMostOne(NumericalDegeneracyError):
    """Empirical mean ``<= 1``: the Fisher-Snedecor mean is always above one."""


class DriftConditionFailure(FSDiffusionError):
    """A Lyapunov drift inequality could not be certified on the grid.

    Attributes
    ----------
    tail : {"left", "right", "both"}
        Which end of the state space breaks the inequality.
    region : tuple of float
        ``(x_lo, x_hi)`` extent of the violating grid points touching that tail.
    window_violated : bool
        Whether the exponents were outside the admissible window a priori.
    """

    def __init__(self, message, tail, region=None, window_violated=False):
        super().__init__(message)
        self.tail = tail
        self.region = region
        self.window_violated = window_violated
