"""Exception hierarchy shared by all dualbatch modules."""


class DualBatchError(Exception):
    """Base class for every error raised by this package."""


class EventNotBracketed(DualBatchError):
    """A stopping event never changed sign before the integration time cap."""


class StepFailure(DualBatchError):
    """Adaptive step-size control underflowed."""


class InvalidFactor(DualBatchError):
    """Dilution factor below one (would concentrate the batch)."""


class WrongInitialArc(DualBatchError):
    """The switching function is non-positive at the initial state."""


class RatioUnreachable(DualBatchError):
    """The terminal concentration-ratio event was not reached."""


class OutOfHorizon(DualBatchError):
    """A policy was queried outside [0, tf]."""


class SingularDenominator(DualBatchError):
    """The input coefficient of dS/dt vanishes; no singular control exists."""


class NoiseOutOfBound(DualBatchError):
    """A noise draw exceeds the declared bound sigma."""


class Infeasible(DualBatchError):
    """The parameter polytope is empty (noise assumption violated)."""


class Unbounded(DualBatchError):
    """An LP over the parameter polytope is unbounded."""


class TreeTooLarge(DualBatchError):
    """The scenario tree exceeds the enumeration limit."""


class EmptySample(DualBatchError):
    """Statistics requested for an empty sample."""


class ConfigError(DualBatchError):
    """Malformed or inconsistent configuration."""
