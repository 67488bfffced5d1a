"""Exception types raised across the simulator."""


class OffloadError(Exception):
    """Base class for all simulator errors."""


# topology / routing
class TopologyError(OffloadError):
    pass


class DisconnectedTopology(TopologyError):
    pass


class DuplicateLink(TopologyError):
    pass


class UnknownEndpoint(TopologyError):
    pass


class NoPath(TopologyError):
    pass


class NoValidIntermediate(TopologyError):
    pass


class ZeroCapacity(OffloadError, ValueError):
    pass


# radio
class InvalidNoise(OffloadError, ValueError):
    pass


class ZeroRateWithOffload(OffloadError, ValueError):
    pass


# device / cloud
class InconsistentDecision(OffloadError, ValueError):
    pass


class EmptyCohort(OffloadError, ValueError):
    pass


class ZeroAllocation(OffloadError, ValueError):
    pass


class NoPlacement(OffloadError, ValueError):
    pass


# environment
class BadScenario(OffloadError, ValueError):
    pass


class InvalidAction(OffloadError, ValueError):
    pass


# learning
class ShapeMismatch(OffloadError, ValueError):
    pass


class EmptyActionSet(OffloadError, ValueError):
    pass


class SeriesTooShort(OffloadError, ValueError):
    pass


class EmptyShard(OffloadError, ValueError):
    pass


class NoClients(OffloadError, ValueError):
    pass


class WrongWindowLength(OffloadError, ValueError):
    pass


# harness
class UnknownExperiment(OffloadError, ValueError):
    pass


class ConfigError(OffloadError, ValueError):
    pass


class IoFailure(OffloadError, OSError):
    """Output directory or file could not be written."""
