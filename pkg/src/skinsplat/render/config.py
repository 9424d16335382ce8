"""Rasterizer constants, collected in one place.

These four numbers are standard splatting practice: splat support truncated
at the 3-sigma bounding box, per-splat alpha clamped below 1, a small
isotropic dilation added to every projected covariance, and front-to-back
accumulation stopped once almost no transmittance remains.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RasterConfig:
    sigma_cutoff: float = 3.0  # splat extent, in standard deviations per axis
    alpha_clamp: float = 0.99  # per-splat compositing alpha ceiling
    cov2d_dilation: float = 0.3  # pixels^2 added to cov2d's diagonal
    transmittance_eps: float = 1e-4  # stop compositing below this transmittance
    tile_size: int = 16
    background_color: tuple[float, float, float] = (0.0, 0.0, 0.0)
    debug_checks: bool = False  # assert the accumulated-alpha bound per render


DEFAULT_CONFIG = RasterConfig()
