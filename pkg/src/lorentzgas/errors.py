"""Exception hierarchy shared by all modules."""


class LorentzGasError(Exception):
    pass


class GeometryError(LorentzGasError):
    pass


class GrazingLaunch(GeometryError):
    pass


class FlightCapExceeded(GeometryError):
    def __init__(self, message: str, trial: int | None = None):
        super().__init__(message)
        self.trial = trial


class SingularityStraddle(GeometryError):
    pass


class NonPrimitive(LorentzGasError, ValueError):
    pass


class ExponentOutOfRange(LorentzGasError, ValueError):
    pass


class ClosedCorridor(LorentzGasError, ValueError):
    pass


class NoTangentIntersection(GeometryError):
    pass


class ChartViolation(GeometryError):
    pass


class InsufficientTrials(LorentzGasError):
    """Statistical guard: too few expected events to report an estimate."""


class InvalidConfig(LorentzGasError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnknownExperiment(LorentzGasError, ValueError):
    pass


class UnsupportedKind(LorentzGasError, ValueError):
    pass


class EmptyData(UnsupportedKind):
    pass
