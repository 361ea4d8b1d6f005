"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for bad input
(malformed networks, specs, arguments) and :class:`PipelineError` for
failures while computing on otherwise valid input. The CLI maps them to
exit codes 2 and 3.
"""


class RadialFlowError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RadialFlowError, ValueError):
    pass


class PipelineError(RadialFlowError, RuntimeError):
    pass


# network
class SchemaError(ValidationError):
    pass


class CycleDetected(ValidationError):
    pass


class Disconnected(ValidationError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class WrongEdgeCount(ValidationError):
    pass


class UnknownNode(ValidationError, KeyError):
    def __str__(self):
        return ValidationError.__str__(self)


# flowmodel
class InvalidSpec(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotInvertible(PipelineError):
    pass


# simulator
class InvalidModel(ValidationError):
    pass


# learner
class InsufficientSamples(ValidationError):
    pass


class UnmeasuredNode(ValidationError):
    pass


class DisconnectedCandidates(PipelineError):
    def __init__(self, message, components=()):
        super().__init__(message)
        self.components = [sorted(c) for c in components]


# estimator
class UnknownEdgeSpec(PipelineError):
    pass


# oracles
class NonlinearSpec(PipelineError):
    pass


class TooLarge(PipelineError):
    pass


# experiments
class TooManyFictitious(ValidationError):
    pass


class SizeMismatch(ValidationError):
    pass
