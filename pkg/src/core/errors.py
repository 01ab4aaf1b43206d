"""Error hierarchy shared by every solver module.

Input problems subclass ``ValueError`` and computation failures subclass
``RuntimeError`` so callers can separate them without importing this module.
"""


class RestlessError(Exception):
    """Base class for all toolkit errors."""


# --- Input errors ---

class InstanceError(RestlessError, ValueError):
    """An instance or argument violates a documented invariant."""


class ParameterOutOfRange(InstanceError):
    """A numeric parameter lies outside its documented range."""


class ShapeMismatch(InstanceError):
    """A policy, parameter set or state vector does not fit the instance."""


class VariantMismatch(InstanceError):
    """The requested LP variant is inconsistent with the instance features."""


class UnsupportedShape(InstanceError):
    """The instance shape is outside what an operation supports."""


# --- Computation errors ---

class SolverError(RestlessError, RuntimeError):
    """A solver could not produce a result."""


class Infeasible(SolverError):
    pass


class Unbounded(SolverError):
    pass


class NumericFailure(SolverError):
    """Pivot tolerance or an iteration cap was breached."""


class DegenerateArm(SolverError):
    pass


class AllArmsInactive(SolverError):
    """No arm earns a positive excess reward at any penalty."""


class NoTightConstraint(SolverError):
    pass


class MissingSupport(SolverError):
    """An active arm has no positive probe variable in the LP support."""


class StateSpaceTooLarge(SolverError):
    pass


class NoConvergence(SolverError):
    pass
