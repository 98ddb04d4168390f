"""Error vocabulary shared by the exact engine, the MC engine, and the CLI."""


class EnlargeLabError(Exception):
    """Base class for all library errors."""


class NotPredictable(EnlargeLabError):
    """A process violates the required predictability (measurability) level."""


class NotMartingale(EnlargeLabError):
    """An input that must be a martingale carries nonzero conditional drift."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class NoRepresentation(EnlargeLabError):
    """The driver cannot represent the target martingale within tolerance."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class Infeasible(EnlargeLabError):
    """A linear system or LP has no admissible solution within tolerance."""

    def __init__(self, msg, detail=None):
        super().__init__(msg)
        self.detail = detail


class InvalidZ(EnlargeLabError):
    """Survival process leaves the open interval (0, 1) where required."""


class NegativeMass(EnlargeLabError):
    """The default-time mass recursion produced a negative conditional mass."""


class NonPositive(EnlargeLabError):
    """A process that must stay strictly positive hit zero or below."""


class RecursionMismatch(EnlargeLabError):
    """Recursively assembled drift factors disagree with the direct drift."""


class InsufficientPaths(EnlargeLabError):
    """Too few Monte Carlo paths for the requested statistical test."""


class ConfigError(EnlargeLabError):
    """Configuration file or generator parameters fail validation."""


class EngineError(EnlargeLabError):
    """Unexpected internal failure propagated to the orchestration layer."""


class MissingReport(EnlargeLabError):
    """Report requested from a directory that holds no report.json."""


class GenerationFailed(EnlargeLabError):
    """Rejection sampling exhausted its budget without a feasible scenario."""
