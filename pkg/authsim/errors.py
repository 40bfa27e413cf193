"""
Named error types raised across the simulator.

Precondition and domain violations subclass ``ValueError``; failures that
only show up while running (solver caps, exhausted tables, unwritable
output) subclass ``RuntimeError``/``OSError``.
"""

from __future__ import annotations


class AuthSimError(Exception):
    """Base class for every simulator-specific error."""


class ParameterDomain(AuthSimError, ValueError):
    pass


class DimensionMismatch(AuthSimError, ValueError):
    pass


class SingleClassError(AuthSimError, ValueError):
    pass


class DegenerateLabels(SingleClassError):
    """Calibration samples collapse to one label (e.g. all identical)."""


class IterationLimit(AuthSimError, RuntimeError):
    pass


class InsufficientData(AuthSimError, ValueError):
    pass


class EmptyRetention(InsufficientData):
    """The guard band dropped every calibration round."""


class MissingRound(AuthSimError, ValueError):
    pass


class RoundMismatch(AuthSimError, ValueError):
    pass


class InsufficientEntropy(AuthSimError, ValueError):
    pass


class AlreadyTerminated(AuthSimError, RuntimeError):
    pass


class ProtocolViolation(AuthSimError, RuntimeError):
    """A state machine was asked to take a transition it does not allow."""


class ChallengeExhausted(AuthSimError, RuntimeError):
    pass


class EmptyPopulation(AuthSimError, ValueError):
    pass


class ParseError(AuthSimError, ValueError):
    pass


class SchemaError(AuthSimError, ValueError):
    def __init__(self, message: str, path: str = "") -> None:
        super().__init__(message)
        self.path = path


class ReportIOError(AuthSimError, OSError):
    pass
