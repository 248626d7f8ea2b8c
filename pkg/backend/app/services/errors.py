"""
Exception hierarchy shared by every simulation service.

Each exception keeps the offending inputs as attributes so that the harness
and the HTTP routers can report them without parsing messages.
"""

from typing import Optional, Sequence


class SimulationError(Exception):
    """Base exception for simulation errors."""
    pass


class ParameterError(SimulationError, ValueError):
    """Raised when an operation's precondition is violated."""
    def __init__(self, name: str, value, requirement: str):
        self.name = name
        self.value = value
        self.requirement = requirement
        super().__init__(f"Invalid {name}={value!r}: must be {requirement}.")


class ResourceCapError(SimulationError):
    """Raised when a path exceeds a configured step, cycle or jump cap."""
    def __init__(self, what: str, cap: int, count: Optional[int] = None):
        self.what = what
        self.cap = cap
        self.count = count
        detail = f" (reached {count})" if count is not None else ""
        super().__init__(f"{what} exceeded cap {cap}{detail}.")


class CalibrationError(SimulationError):
    """Raised when an empirical normalizer cannot be solved reliably."""
    def __init__(self, message: str, exceedances: Optional[int] = None):
        self.exceedances = exceedances
        super().__init__(message)


class PrecisionError(SimulationError):
    """Raised when a series cannot reach the requested precision."""
    def __init__(self, alpha: float, z: float, digits_needed: int):
        self.alpha = alpha
        self.z = z
        self.digits_needed = digits_needed
        super().__init__(
            f"Mittag-Leffler series for alpha={alpha}, z={z} needs "
            f"{digits_needed} digits; use the Monte Carlo route."
        )


class ToleranceError(SimulationError):
    """Raised when the subordinator truncation tolerance cannot be met."""
    def __init__(self, tol: float, jumps: int, cap: int):
        self.tol = tol
        self.jumps = jumps
        self.cap = cap
        super().__init__(
            f"Truncation tolerance {tol} needs {jumps} jumps, above cap {cap}."
        )


class InsufficientDataError(SimulationError):
    """Raised when an estimator has too few observations or exceedances."""
    def __init__(self, what: str, available: int, required: int):
        self.what = what
        self.available = available
        self.required = required
        super().__init__(f"{what}: {available} available, {required} required.")


class BankMissingError(SimulationError):
    """Raised when a Monte Carlo route is used without a sample bank."""
    def __init__(self, law: str):
        self.law = law
        super().__init__(f"{law} needs a W sample bank for this route.")


class ConfigError(SimulationError):
    """Raised for invalid experiment configurations."""
    def __init__(self, message: str, diagnostics: Sequence[str] = ()):
        self.diagnostics = list(diagnostics)
        details = "".join(f"\n  - {d}" for d in self.diagnostics)
        super().__init__(f"{message}{details}")
