"""Exception hierarchy shared across the package."""


class TrafficRiskError(Exception):
    """Base class for all package errors."""


class UnknownLane(TrafficRiskError):
    pass


class UnknownVehicle(TrafficRiskError):
    pass


class FrameOutOfRange(TrafficRiskError):
    pass


class FrameGap(TrafficRiskError):
    pass


class MissingColumn(TrafficRiskError):
    pass


class MalformedRow(TrafficRiskError):
    pass


class SeriesTooShort(TrafficRiskError):
    pass


class TrackTooShort(TrafficRiskError):
    pass


class ZeroVariance(TrafficRiskError):
    pass


class AllZeroDiffs(TrafficRiskError):
    pass


class NotAdjacent(TrafficRiskError):
    pass


class NonPositiveGap(TrafficRiskError):
    pass


class InsufficientData(TrafficRiskError):
    pass


class DivergedTraining(TrafficRiskError):
    pass


class InvalidSpec(TrafficRiskError):
    pass


class MismatchedCorpora(TrafficRiskError):
    pass


class NoEgoCandidates(TrafficRiskError):
    pass
