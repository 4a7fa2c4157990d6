"""
Exception hierarchy for cone-kernel.

Every failure an operation can report maps to one class below. Batch
operations (sweeps, discrepancy reports, solution sampling) catch
ConeKernelError per row and record the message instead of aborting.
"""
from typing import Optional, Sequence


class ConeKernelError(Exception):
    """Base class for all toolkit errors."""

    def to_dict(self) -> dict:
        """Machine-readable error object (printed by the CLI on stderr)."""
        return {"error": type(self).__name__, "message": str(self)}


class DomainError(ConeKernelError, ValueError):
    """A parameter lies outside the operation's domain."""


class DerivativeOrderError(DomainError):
    """Requested derivative order exceeds what the test function supports."""

    def __init__(self, order: int, max_order: int):
        super().__init__(f"derivative order {order} exceeds max_exact_derivative_order={max_order}")
        self.order = order
        self.max_order = max_order


class PoleSeparationError(DomainError):
    """Poles too close to each other or to an interval end for the excision schedule."""


class NonConvergenceError(ConeKernelError):
    """Quadrature or extrapolation failed to reach its tolerance."""

    def __init__(self, message: str, value=None, error_estimate: Optional[float] = None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate

    def to_dict(self) -> dict:
        data = super().to_dict()
        if self.value is not None:
            value = complex(self.value)
            data["value"] = {"re": value.real, "im": value.imag}
        if self.error_estimate is not None:
            data["error_estimate"] = float(self.error_estimate)
        return data


class GridResolutionError(DomainError):
    """DFT grid too coarse or too narrow for the function's decay scale."""


class ConeError(DomainError):
    """A tau sample lies outside the conjugate cone."""

    def __init__(self, sample, a: float):
        super().__init__(f"tau sample {tuple(sample)} is outside the conjugate cone a*tau2 > |tau1| (a={a})")
        self.sample = tuple(sample)
        self.a = a


class SolvabilityError(ConeKernelError):
    """|kappa - s| >= 1/2: the solution formula does not apply."""


class FitError(ConeKernelError):
    """Order fitting impossible (too few usable points)."""


class BelowNoiseFloorError(FitError):
    """All errors are zero, so there is nothing to fit."""


class ConfigError(ConeKernelError):
    """Configuration could not be parsed or failed validation."""

    def __init__(self, message: str, fields: Sequence[str] = (), line: Optional[int] = None,
                 column: Optional[int] = None):
        super().__init__(message)
        self.fields = list(fields)
        self.line = line
        self.column = column

    def to_dict(self) -> dict:
        data = super().to_dict()
        if self.fields:
            data["fields"] = self.fields
        if self.line is not None:
            data["line"] = self.line
            data["column"] = self.column
        return data


class RegistryError(ConeKernelError, KeyError):
    """Unknown name in a registry."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ReportError(ConeKernelError):
    """A report could not be written."""
