"""Exception hierarchy shared by the numerical core, the scenarios and the CLI."""
from typing import Any, Optional, Sequence


class HRError(Exception):
    """Base class for every error raised by hr_systems."""


class SignatureError(HRError, ValueError):
    pass


class ConeDomainError(HRError, ValueError):
    pass


class SingularityError(HRError, ArithmeticError):
    pass


class SamplingError(HRError):
    pass


class FrameError(HRError, ValueError):
    pass


class DomainError(HRError, ValueError):
    pass


class ScheduleDomainError(DomainError):
    pass


class KinematicDomainError(DomainError):
    pass


class CapabilityError(HRError):
    """The requested operation is not supported by the chosen family or size."""


class DivergenceError(HRError, ArithmeticError):

    def __init__(self, message: str, last_state: Any = None, last_time: Optional[float] = None):
        super().__init__(message)
        self.last_state = last_state
        self.last_time = last_time


class CoverageError(HRError):

    def __init__(self, message: str, escapees: Sequence[int] = ()):
        super().__init__(message)
        self.escapees = list(escapees)


class DataCorruptionError(HRError):
    pass


class ShapeError(HRError, ValueError):
    pass


class ProfileError(HRError, ValueError):
    pass


class GeometryError(HRError, ValueError):
    pass


class SetupError(HRError):
    pass


class ConfigParseError(HRError):

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class ConfigValidationError(HRError):

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnknownScenarioError(HRError):
    pass
