"""Exception types shared across the package."""


class MagGeoError(Exception):
    """Base class for all package errors."""


class ConfigError(MagGeoError):
    """Invalid or inconsistent run configuration."""


class FlowBlowupError(MagGeoError):
    """Trajectory left the finite range (stiff segment or bad step size)."""


class RefineDivergenceError(MagGeoError):
    """Shooting Newton failed to converge; candidate rejected."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class NotFoundError(MagGeoError):
    """A search operation exhausted its budget without a hit.

    Carries the scanned family / diagnostics so callers can report what
    was tried instead of silently fabricating a result.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class SubdivisionError(MagGeoError):
    """Broken-arc projection failed: h too small for the short-arc condition."""


class NotApplicableError(MagGeoError):
    """Loop left the tubular annulus; split detection does not apply."""
