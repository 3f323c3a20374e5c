# Errors - Exception hierarchy shared by the model, services and controller.


class ChainAnalysisError(ValueError):
    # Base class for every domain error raised by the toolkit.
    pass


class NonIrreducible(ChainAnalysisError):
    pass


class InconsistentRatios(ChainAnalysisError):
    pass


class DimensionMismatch(ChainAnalysisError):
    pass


class NegativeTime(ChainAnalysisError):
    pass


class UniformizationOverflow(ChainAnalysisError):
    # Raised when the number of uniformization steps would exceed the configured cap.
    pass


class StartAbsorbed(ChainAnalysisError):
    pass


class EmptyAbsorbingSet(ChainAnalysisError):
    pass


class NotReversible(ChainAnalysisError):
    pass


class DegreeInfeasible(ChainAnalysisError):
    pass


class ZeroReferenceMass(ChainAnalysisError):
    pass


class NotMeanZero(ChainAnalysisError):
    pass


class OutOfRange(ChainAnalysisError):
    pass


class SizeCapExceeded(ChainAnalysisError):
    pass


class CapTooSmall(ChainAnalysisError):
    pass


class InvalidThreshold(ChainAnalysisError):
    pass


class AtLeastTwoSizes(ChainAnalysisError):
    pass


class EpsilonOutOfRange(ChainAnalysisError):
    pass


class TimeOutOfWindow(ChainAnalysisError):
    pass


class CopiesTooSmall(ChainAnalysisError):
    pass


class InvalidConfig(ChainAnalysisError):
    pass


class ProfileInvariantError(ChainAnalysisError):
    pass


class ChainFormatError(ChainAnalysisError):
    """Malformed chain-spec file.

    The message always starts with a location: ``path:line:column`` for JSON
    syntax errors, or a field path such as ``rates[3][2]`` for schema errors.
    """

    def __init__(self, location: str, message: str) -> None:
        self.location = location
        super().__init__(f"{location}: {message}")


class UnderflowRiskWarning(UserWarning):
    # Stationary masses below the double floor while linear mode was requested.
    pass
