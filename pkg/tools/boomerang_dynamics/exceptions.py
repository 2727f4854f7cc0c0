"""
Boomerang Dynamics Errors

Exception hierarchy shared by every module of the tool. Each class carries the
exit code the command-line surface reports for it.
"""


class BoomerangError(Exception):
    """Base class for all errors raised by the boomerang dynamics tool."""

    exit_code = 2


class ModelError(BoomerangError):
    """A model-level failure: valid input the theory does not cover."""

    exit_code = 1


class InputError(BoomerangError, ValueError):
    """Invalid input, file content or configuration."""

    exit_code = 2


# Graph construction

class IndexOutOfRange(InputError):
    pass


class DuplicateEdge(InputError):
    pass


class SelfLoop(InputError):
    pass


class InvalidSign(InputError):
    pass


class InvalidSizes(InputError):
    pass


class CountExceedsEdges(InputError):
    pass


class GraphFormatError(InputError):
    """Malformed graph, edge-sequence or opinion-vector file."""


# Dynamics

class EmptyEdgeSet(InputError):
    pass


class InvalidDistribution(InputError):
    pass


class InvalidEdge(InputError):
    pass


class UnknownEdge(InputError):
    pass


class InvalidInitialOpinion(InputError):
    pass


class InvalidWeight(InputError):
    pass


class InvalidParams(InputError):
    pass


class InvalidEpsilon(InputError):
    pass


class OpinionRangeError(BoomerangError, AssertionError):
    """An update left [o_min, o_max] by more than rounding can explain."""

    exit_code = 1


# Model-level failures

class ArrangementViolated(ModelError):
    pass


class NoPath(ModelError):
    pass


class ProximityLimitExceeded(ModelError):
    pass


class WrongFactionCount(ModelError):
    pass


class NeverSeparated(ModelError):
    pass


class NotSingleFaction(ModelError):
    pass


# Configuration

class UnknownPreset(InputError):
    pass


class ConfigParseError(InputError):
    pass


class SchemaViolation(InputError):
    pass


class ConfigValidationError(InputError):
    """Config value out of range; the message names the field path."""

    def __init__(self, message, field_path=None):
        super().__init__(message)
        self.field_path = field_path
