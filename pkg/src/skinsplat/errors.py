"""Exception types for failure modes that are not plain input errors.

Precondition violations (dimension mismatches, out-of-range indices,
unnormalized weights) raise ``ValueError`` directly; the classes here mark
algorithmic failures a caller may want to catch and recover from.
"""


class SkinsplatError(Exception):
    """Base class for skinsplat failures."""


class EmptyTextureError(SkinsplatError):
    """Baking produced no valid texels (e.g. all UV triangles degenerate)."""


class PlaneFitError(SkinsplatError):
    """RANSAC could not produce a ground plane (all samples degenerate)."""


class ScaleSolveError(SkinsplatError):
    """No joint ray yields a positive ground-plane intersection."""


class PnPSolveError(SkinsplatError):
    """Camera pose recovery hit a degenerate configuration."""


class FitDivergedError(SkinsplatError):
    """Optimization produced a non-finite gradient; carries a diagnostic dump."""

    def __init__(self, message: str, dump: dict | None = None):
        super().__init__(message)
        self.dump = dump or {}
