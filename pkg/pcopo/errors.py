"""
Exception hierarchy for the PCOPO workbench

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class PcopoError(Exception):
    """Base class for all workbench errors"""

    exit_code = 1


class ParameterError(PcopoError, ValueError):
    """Invalid physical or numerical parameters"""

    exit_code = 3

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class CommensurabilityError(ParameterError):
    """k_c or k_p does not lie on the simulation wavenumber grid"""


class ConfigError(PcopoError):
    """Unreadable or invalid configuration file"""

    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(field)
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(prefix + message)


class NumericalError(PcopoError, ArithmeticError):
    """Numerical failure: singular systems, divergences, failed searches"""

    exit_code = 4


class ThresholdError(NumericalError):
    """Evaluation at or above the parametric threshold"""


class SingularMatrixError(NumericalError):
    """Singular or ill-conditioned matrix"""


class DivergenceError(NumericalError):
    """A stochastic trajectory overflowed"""

    def __init__(self, message: str, trajectory: Optional[int] = None, time: Optional[float] = None):
        self.trajectory = trajectory
        self.time = time
        details = []
        if trajectory is not None:
            details.append(f"trajectory {trajectory}")
        if time is not None:
            details.append(f"t={time:.6g}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(message + suffix)
