"""Depth-sorted tile rasterization of projected Gaussians, forward and
backward.

The global splat order is a single stable depth sort (ties keep scene
order); tiles parallelize pixels, not ordering, so permuting the scene's
input order or changing the thread count cannot change the image.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numba
import numpy as np

from ..scene import RenderableScene
from . import _kernels
from .camera import Camera, Image, RenderStats
from .config import DEFAULT_CONFIG, RasterConfig
from .projection import ProjectedSplats, backproject_gradients, project

THREADS_ENV = "SKINSPLAT_THREADS"


def _apply_thread_cap() -> None:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return
    try:
        requested = max(1, int(value))
    except ValueError:
        return
    numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))


@dataclass(frozen=True)
class GradientBuffers:
    """Per-Gaussian loss gradients, indexed like the rendered scene.

    ``d_color`` is w.r.t. the activated RGB color, ``d_opacity_logit`` w.r.t.
    the pre-sigmoid opacity, ``d_position`` w.r.t. world position, and
    ``d_cov_world`` w.r.t. the world covariance (full-matrix convention).
    """

    d_color: np.ndarray
    d_opacity_logit: np.ndarray
    d_position: np.ndarray
    d_cov_world: np.ndarray

    def __post_init__(self):
        n = len(self.d_color)
        if (
            self.d_opacity_logit.shape != (n,)
            or self.d_position.shape != (n, 3)
            or self.d_cov_world.shape != (n, 3, 3)
        ):
            raise ValueError("gradient buffers have inconsistent shapes")

    def isotropic_log_scale_grad(self, covariances: np.ndarray) -> np.ndarray:
        """d loss / d(log scale) for isotropic Gaussians: 2 sum(G . V)."""
        return 2.0 * np.einsum("nij,nij->n", self.d_cov_world, covariances)


@dataclass(frozen=True)
class _Prepared:
    """Depth-sorted, tile-binned splats ready for the kernels."""

    splats: ProjectedSplats
    order: np.ndarray  # depth order into the splat arrays
    means: np.ndarray
    cinv: np.ndarray  # (M, 3): inv[0,0], inv[0,1], inv[1,1]
    opacities: np.ndarray
    colors: np.ndarray
    radii: np.ndarray
    tile_offsets: np.ndarray
    tile_splats: np.ndarray
    n_tiles_x: int
    n_tiles_y: int
    stats: RenderStats


def _prepare(
    scene: RenderableScene, camera: Camera, config: RasterConfig
) -> _Prepared:
    splats = project(scene, camera, config)
    num_culled = len(scene) - len(splats.scene_indices)

    # Stable sort on depth: ties keep original scene order.
    order = np.argsort(splats.depths, kind="stable")
    means = np.ascontiguousarray(splats.means2d[order])
    cov = splats.cov2d[order]
    opacities = np.ascontiguousarray(splats.opacities[order])
    colors = np.ascontiguousarray(splats.colors[order])

    det = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] * cov[:, 1, 0]
    ok = det > 0
    num_skipped = int((~ok).sum())
    safe_det = np.where(ok, det, 1.0)
    cinv = np.stack(
        [cov[:, 1, 1] / safe_det, -cov[:, 0, 1] / safe_det, cov[:, 0, 0] / safe_det],
        axis=1,
    )
    radii = config.sigma_cutoff * np.sqrt(
        np.maximum(np.stack([cov[:, 0, 0], cov[:, 1, 1]], axis=1), 0.0)
    )
    # Skipped splats get empty extent so the binning drops them.
    radii[~ok] = -1.0
    cinv[~ok] = 0.0
    radii = np.ascontiguousarray(radii)
    cinv = np.ascontiguousarray(cinv)

    tile = config.tile_size
    n_tiles_x = max(1, (camera.width + tile - 1) // tile)
    n_tiles_y = max(1, (camera.height + tile - 1) // tile)
    counts = _kernels.count_tile_splats(means, radii, n_tiles_x, n_tiles_y, tile)
    tile_offsets = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=tile_offsets[1:])
    tile_splats = _kernels.fill_tile_splats(
        means, radii, n_tiles_x, n_tiles_y, tile, tile_offsets
    )

    stats = RenderStats(
        num_culled=num_culled,
        num_skipped=num_skipped,
        num_drawn=len(means) - num_skipped,
    )
    return _Prepared(
        splats=splats,
        order=order,
        means=means,
        cinv=cinv,
        opacities=opacities,
        colors=colors,
        radii=radii,
        tile_offsets=tile_offsets,
        tile_splats=tile_splats,
        n_tiles_x=n_tiles_x,
        n_tiles_y=n_tiles_y,
        stats=stats,
    )


def render(
    scene: RenderableScene, camera: Camera, config: RasterConfig = DEFAULT_CONFIG
) -> Image:
    """Front-to-back alpha compositing of the depth-sorted splats.

    An empty scene (or a scene with everything culled) renders the
    background color.
    """
    _apply_thread_cap()
    prep = _prepare(scene, camera, config)
    rgb = np.zeros((camera.height, camera.width, 3))
    alpha = np.zeros((camera.height, camera.width))
    _kernels.forward_kernel(
        camera.width,
        camera.height,
        config.tile_size,
        prep.n_tiles_x,
        prep.n_tiles_y,
        prep.tile_offsets,
        prep.tile_splats,
        prep.means,
        prep.cinv,
        prep.opacities,
        prep.colors,
        prep.radii,
        np.asarray(config.background_color, dtype=np.float64),
        config.alpha_clamp,
        config.transmittance_eps,
        rgb,
        alpha,
    )
    if config.debug_checks:
        # Per-pixel sum of alpha'_i prod_{j<i}(1 - alpha'_j) can never exceed 1.
        peak = float(alpha.max(initial=0.0))
        assert peak <= 1.0 + 1e-12, f"transmittance bound violated: {peak}"
    return Image(rgb=rgb, alpha=alpha, stats=prep.stats)


def render_human_only(
    scene: RenderableScene,
    camera: Camera,
    config: RasterConfig = DEFAULT_CONFIG,
    mask_threshold: float = 0.5,
) -> tuple[Image, np.ndarray]:
    """Render only human-tagged Gaussians; mask = accumulated alpha > threshold."""
    image = render(_human_subscene(scene), camera, config)
    return image, image.alpha > mask_threshold


def human_coverage_mask(
    scene: RenderableScene,
    camera: Camera,
    config: RasterConfig = DEFAULT_CONFIG,
    threshold: float = 1e-7,
) -> np.ndarray:
    """Pixels where human Gaussians contribute any visible alpha.

    With the default tiny threshold this bounds the pixel-space footprint of
    a pose change: outside the union of two poses' coverage masks, rendered
    frames agree to the compositing tolerance.
    """
    image = render(_human_subscene(scene), camera, config)
    return image.alpha > threshold


def _human_subscene(scene: RenderableScene) -> RenderableScene:
    idx = np.flatnonzero(scene.is_human)
    return RenderableScene(
        positions=scene.positions[idx],
        covariances=scene.covariances[idx],
        opacities=scene.opacities[idx],
        colors=scene.colors[idx],
        is_human=scene.is_human[idx],
    )


def render_backward(
    scene: RenderableScene,
    camera: Camera,
    d_rgb: np.ndarray,
    config: RasterConfig = DEFAULT_CONFIG,
) -> GradientBuffers:
    """Analytic gradients of the compositing formula for every Gaussian.

    ``d_rgb`` is d(loss)/d(rendered rgb), shape (H, W, 3). The forward pass
    is recomputed per tile; per-(tile, slot) partials are reduced to
    per-Gaussian buffers in a fixed order, so results are reproducible for
    any thread count.
    """
    d_rgb = np.ascontiguousarray(d_rgb, dtype=np.float64)
    if d_rgb.shape != (camera.height, camera.width, 3):
        raise ValueError(
            f"d_rgb shape {d_rgb.shape} does not match the camera's "
            f"({camera.height}, {camera.width}, 3)"
        )
    _apply_thread_cap()
    prep = _prepare(scene, camera, config)

    n_slots = len(prep.tile_splats)
    slot_color = np.zeros((n_slots, 3))
    slot_alpha = np.zeros(n_slots)
    slot_mean = np.zeros((n_slots, 2))
    slot_cinv = np.zeros((n_slots, 3))
    _kernels.backward_kernel(
        camera.width,
        camera.height,
        config.tile_size,
        prep.n_tiles_x,
        prep.n_tiles_y,
        prep.tile_offsets,
        prep.tile_splats,
        prep.means,
        prep.cinv,
        prep.opacities,
        prep.colors,
        prep.radii,
        np.asarray(config.background_color, dtype=np.float64),
        config.alpha_clamp,
        config.transmittance_eps,
        d_rgb,
        slot_color,
        slot_alpha,
        slot_mean,
        slot_cinv,
    )

    # Deterministic reduction: slots -> sorted splats (np.add.at is sequential).
    m = len(prep.means)
    d_color_s = np.zeros((m, 3))
    d_alpha_s = np.zeros(m)
    d_mean_s = np.zeros((m, 2))
    d_cinv_s = np.zeros((m, 3))
    np.add.at(d_color_s, prep.tile_splats, slot_color)
    np.add.at(d_alpha_s, prep.tile_splats, slot_alpha)
    np.add.at(d_mean_s, prep.tile_splats, slot_mean)
    np.add.at(d_cinv_s, prep.tile_splats, slot_cinv)

    # cinv -> cov2d: dL/dC = -C^-1 G C^-1 (full-matrix convention).
    cinv_mat = np.zeros((m, 2, 2))
    cinv_mat[:, 0, 0] = prep.cinv[:, 0]
    cinv_mat[:, 0, 1] = cinv_mat[:, 1, 0] = prep.cinv[:, 1]
    cinv_mat[:, 1, 1] = prep.cinv[:, 2]
    g_cinv = np.zeros((m, 2, 2))
    g_cinv[:, 0, 0] = d_cinv_s[:, 0]
    g_cinv[:, 0, 1] = g_cinv[:, 1, 0] = 0.5 * d_cinv_s[:, 1]
    g_cinv[:, 1, 1] = d_cinv_s[:, 2]
    d_cov2d_s = -np.einsum("mij,mjk,mkl->mil", cinv_mat, g_cinv, cinv_mat)

    # Undo the depth sort back to projected-splat order.
    inv = np.empty_like(prep.order)
    inv[prep.order] = np.arange(m)
    d_mean2d = d_mean_s[inv]
    d_cov2d = d_cov2d_s[inv]
    d_color_p = d_color_s[inv]
    d_alpha_p = d_alpha_s[inv]

    d_position, d_cov_world = backproject_gradients(
        scene, camera, prep.splats, d_mean2d, d_cov2d
    )
    n = len(scene)
    d_color = np.zeros((n, 3))
    d_opacity_logit = np.zeros(n)
    np.add.at(d_color, prep.splats.scene_indices, d_color_p)
    alpha_act = prep.splats.opacities
    np.add.at(
        d_opacity_logit,
        prep.splats.scene_indices,
        d_alpha_p * alpha_act * (1.0 - alpha_act),
    )
    return GradientBuffers(
        d_color=d_color,
        d_opacity_logit=d_opacity_logit,
        d_position=d_position,
        d_cov_world=d_cov_world,
    )


def bench(
    num_points: int = 50_000,
    width: int = 256,
    height: int = 256,
    frames: int = 20,
    seed: int = 0,
    config: RasterConfig = DEFAULT_CONFIG,
) -> dict:
    """Render a synthetic random scene repeatedly and report FPS statistics."""
    rng = np.random.default_rng(seed)
    positions = rng.uniform(-1.0, 1.0, size=(num_points, 3))
    scales = np.exp(rng.uniform(np.log(0.004), np.log(0.02), size=num_points))
    covariances = (scales**2)[:, None, None] * np.eye(3)[None]
    scene = RenderableScene(
        positions=positions,
        covariances=covariances,
        opacities=rng.uniform(0.2, 0.9, size=num_points),
        colors=rng.uniform(0.0, 1.0, size=(num_points, 3)),
        is_human=np.zeros(num_points, dtype=bool),
    )
    camera = Camera.looking_at(
        eye=(0.0, 0.0, -3.2), target=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0),
        fov_deg=45.0, width=width, height=height,
    )
    render(scene, camera, config)  # warm-up (JIT compile + caches)

    times = []
    for _ in range(frames):
        start = time.perf_counter()
        render(scene, camera, config)
        times.append(time.perf_counter() - start)
    times_arr = np.asarray(times)
    return {
        "num_points": num_points,
        "width": width,
        "height": height,
        "frames": frames,
        "threads": numba.get_num_threads(),
        "mean_ms": float(times_arr.mean() * 1e3),
        "min_ms": float(times_arr.min() * 1e3),
        "max_ms": float(times_arr.max() * 1e3),
        "fps": float(1.0 / times_arr.mean()),
    }
