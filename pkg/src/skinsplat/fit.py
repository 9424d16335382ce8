"""Joint fitting of background Gaussians and human attribute grids against
target frames.

The loss combines full-image and human-masked L1 + SSIM terms with L2
regularizers on the human residual grids. Every group except the
background rotation has an analytic gradient chain from the rasterizer
(colors, opacities, positions/offsets, per-axis and isotropic log scales,
LBS weights) and is updated with Adam; background rotation falls back to
coordinate-chunked central finite differences and is frozen by default.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .alignment import SceneAlignment
from .body import Pose, SkinnedMesh
from .errors import FitDivergedError
from .metrics import ssim_with_grad
from .render import Camera, Image, RasterConfig, DEFAULT_CONFIG
from .render.rasterizer import render, render_backward
from .scene import (
    BackgroundGaussians,
    HumanGaussians,
    PosedHuman,
    RenderableScene,
    merge,
    pose_human,
    save_background_ply,
    save_human,
)
from .texture import PositionTexture

_MIN_SSIM_SIDE = 11


@dataclass(frozen=True)
class FitConfig:
    """Loss weights, iteration budget, per-group learning rates, RNG seed.

    lambda1/lambda2 follow the reference values 0.7/0.3; lambda3 is the
    LPIPS slot and defaults to 0 (perceptual network out of scope);
    lambda4..6 weight the geometry/offset/scale regularizers at 1.0.
    """

    lambda1: float = 0.7
    lambda2: float = 0.3
    lambda3: float = 0.0
    lambda4: float = 1.0
    lambda5: float = 1.0
    lambda6: float = 1.0
    iterations: int = 400
    seed: int = 0
    # Background groups
    lr_bg_position: float = 1e-4
    lr_bg_rotation: float = 0.0  # finite-difference fallback; frozen by default
    lr_bg_scale: float = 0.0  # finite-difference fallback; frozen by default
    lr_bg_opacity: float = 5e-2
    lr_bg_color: float = 5e-2
    # Human groups
    lr_offsets: float = 1e-4
    lr_color: float = 5e-2
    lr_scale: float = 5e-3
    lr_opacity: float = 5e-2
    lr_lbs_weights: float = 1e-3
    # Adam moments
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # Finite-difference fallback controls
    fd_step: float = 1e-3
    fd_batch: int = 64
    checkpoint_every: int = 200  # periodic scene checkpoints; 0 disables

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "FitConfig":
        return cls(**doc)


@dataclass(frozen=True)
class Frame:
    """One target view: image, camera, human mask, and the body pose."""

    image: Image
    camera: Camera
    mask: np.ndarray
    pose: Pose

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.image.height, self.image.width):
            raise ValueError(
                f"mask shape {mask.shape} does not match image "
                f"({self.image.height}, {self.image.width})"
            )
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class LossBreakdown:
    l1: float
    ssim: float
    l1_human: float
    ssim_human: float
    geo: float
    offset: float
    scale: float
    total: float

    def as_row(self) -> list[float]:
        return [self.l1, self.ssim, self.l1_human, self.ssim_human,
                self.geo, self.offset, self.scale, self.total]

    ROW_HEADER = ["l1", "ssim", "l1_human", "ssim_human", "geo", "offset", "scale", "total"]


def mask_bbox(mask: np.ndarray, min_side: int = _MIN_SSIM_SIDE) -> tuple[int, int, int, int] | None:
    """Tight bounding box (y0, y1, x0, x1) of a mask, grown to ``min_side``."""
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        return None
    h, w = mask.shape
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    while (y1 - y0) < min(min_side, h):
        y0 = max(0, y0 - 1)
        y1 = min(h, y1 + 1)
    while (x1 - x0) < min(min_side, w):
        x0 = max(0, x0 - 1)
        x1 = min(w, x1 + 1)
    return y0, y1, x0, x1


def regularizer_values(human: HumanGaussians) -> tuple[float, float, float]:
    """(geo, offset, scale): mean squares of the residual attribute grids."""
    geo = 0.5 * (float(np.mean(human.color_grid**2)) + float(np.mean(human.opacity_grid**2)))
    offset = float(np.mean(human.offsets**2))
    scale = float(np.mean(human.scale_grid**2))
    return geo, offset, scale


def compute_loss(
    rendered: Image,
    rendered_human_only: Image,
    frame: Frame,
    human: HumanGaussians,
    config: FitConfig,
) -> LossBreakdown:
    """Composite loss; see :func:`compute_loss_with_grads` for the fit path."""
    breakdown, _, _ = _loss_impl(rendered, rendered_human_only, frame, human, config, False)
    return breakdown


def compute_loss_with_grads(
    rendered: Image,
    rendered_human_only: Image,
    frame: Frame,
    human: HumanGaussians,
    config: FitConfig,
) -> tuple[LossBreakdown, np.ndarray, np.ndarray]:
    """Loss plus d(total)/d(rendered rgb) and d(total)/d(human-only rgb)."""
    return _loss_impl(rendered, rendered_human_only, frame, human, config, True)


def _loss_impl(rendered, rendered_human_only, frame, human, config, want_grads):
    target = frame.image.rgb
    pred = rendered.rgb
    if pred.shape != target.shape:
        raise ValueError(f"rendered shape {pred.shape} != target {target.shape}")

    diff = pred - target
    l1 = float(np.mean(np.abs(diff)))
    ssim_val, ssim_grad = ssim_with_grad(pred, target)
    ssim_term = max(0.0, 1.0 - ssim_val)

    d_full = None
    d_humanimg = None
    if want_grads:
        d_full = config.lambda1 * np.sign(diff) / diff.size - config.lambda2 * ssim_grad
        d_humanimg = np.zeros_like(rendered_human_only.rgb)

    bbox = mask_bbox(frame.mask)
    if bbox is None:
        warnings.warn("empty human mask; human loss terms set to 0", stacklevel=2)
        l1_h, ssim_h_term = 0.0, 0.0
    else:
        y0, y1, x0, x1 = bbox
        masked_target = target * frame.mask[:, :, None]
        crop_pred = rendered_human_only.rgb[y0:y1, x0:x1]
        crop_target = masked_target[y0:y1, x0:x1]
        diff_h = crop_pred - crop_target
        l1_h = float(np.mean(np.abs(diff_h)))
        ssim_h, ssim_h_grad = ssim_with_grad(crop_pred, crop_target)
        ssim_h_term = max(0.0, 1.0 - ssim_h)
        if want_grads:
            d_humanimg[y0:y1, x0:x1] = (
                config.lambda1 * np.sign(diff_h) / diff_h.size
                - config.lambda2 * ssim_h_grad
            )

    geo, offset, scale = regularizer_values(human)
    total = (
        config.lambda1 * (l1 + l1_h)
        + config.lambda2 * (ssim_term + ssim_h_term)
        + config.lambda4 * geo
        + config.lambda5 * offset
        + config.lambda6 * scale
    )
    breakdown = LossBreakdown(
        l1=l1,
        ssim=ssim_term,
        l1_human=l1_h,
        ssim_human=ssim_h_term,
        geo=geo,
        offset=offset,
        scale=scale,
        total=total,
    )
    return breakdown, d_full, d_humanimg


# ---------------------------------------------------------------------------
# Adam + simplex projection
# ---------------------------------------------------------------------------


class Adam:
    """First-order moment-based updates, one instance per parameter group."""

    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        if self.lr == 0.0:
            return
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def project_rows_to_simplex(values: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    v = np.asarray(values, dtype=np.float64)
    n, k = v.shape
    u = np.sort(v, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1)
    ks = np.arange(1, k + 1)
    cond = u + (1.0 - css) / ks > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)  # last true index per row
    theta = (css[np.arange(n), rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta[:, None], 0.0)


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------


@dataclass
class FitScene:
    """Everything the fit mutates or needs to pose the human."""

    background: BackgroundGaussians
    human: HumanGaussians
    mesh: SkinnedMesh
    alignment: SceneAlignment = field(default_factory=SceneAlignment.identity)
    texture: PositionTexture | None = None

    def copy(self) -> "FitScene":
        return FitScene(
            background=self.background.copy(),
            human=self.human.copy(),
            mesh=self.mesh,
            alignment=self.alignment,
            texture=self.texture,
        )


@dataclass(frozen=True)
class FitResult:
    scene: FitScene
    history: list[LossBreakdown]

    def save_history_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iteration", *LossBreakdown.ROW_HEADER])
            for i, row in enumerate(self.history):
                writer.writerow([i, *row.as_row()])


def _human_scene(posed: PosedHuman) -> RenderableScene:
    n = len(posed.positions)
    return RenderableScene(
        positions=posed.positions,
        covariances=posed.covariances,
        opacities=posed.opacities,
        colors=posed.colors,
        is_human=np.ones(n, dtype=bool),
    )


def _check_finite(group: str, grad: np.ndarray) -> None:
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad).reshape(len(grad), -1).all(axis=1))
        raise FitDivergedError(
            f"non-finite gradient in parameter group {group!r}",
            dump={"group": group, "bad_indices": bad[:32].tolist(), "count": int(len(bad))},
        )


def optimize(
    scene: FitScene,
    frames: list[Frame],
    config: FitConfig = FitConfig(),
    raster_config: RasterConfig = DEFAULT_CONFIG,
    run_dir: str | Path | None = None,
) -> FitResult:
    """Fit background and human parameters to the target frames.

    Iterations cycle through frames round-robin (mini-batch size 1). The
    loss history records one entry per iteration; with zero iterations the
    scene is returned unchanged.
    """
    if len(frames) < 1:
        raise ValueError("need at least one frame")
    out = scene.copy()
    bg = out.background
    human = out.human

    if run_dir is not None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        manifest = {
            "config": config.to_dict(),
            "num_frames": len(frames),
            "num_background": len(bg),
            "num_human_texels": len(human),
        }
        (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))

    opts = {
        "bg_position": Adam(bg.positions.shape, config.lr_bg_position, config.beta1, config.beta2, config.eps),
        "bg_rotation": Adam(bg.rotations.shape, config.lr_bg_rotation, config.beta1, config.beta2, config.eps),
        "bg_scale": Adam(bg.log_scales.shape, config.lr_bg_scale, config.beta1, config.beta2, config.eps),
        "bg_opacity": Adam(bg.opacity_logits.shape, config.lr_bg_opacity, config.beta1, config.beta2, config.eps),
        "bg_color": Adam(bg.color_logits.shape, config.lr_bg_color, config.beta1, config.beta2, config.eps),
        "offsets": Adam(human.offsets.shape, config.lr_offsets, config.beta1, config.beta2, config.eps),
        "color": Adam(human.color_grid.shape, config.lr_color, config.beta1, config.beta2, config.eps),
        "scale": Adam(human.scale_grid.shape, config.lr_scale, config.beta1, config.beta2, config.eps),
        "opacity": Adam(human.opacity_grid.shape, config.lr_opacity, config.beta1, config.beta2, config.eps),
        "lbs": Adam(human.weight_values.shape, config.lr_lbs_weights, config.beta1, config.beta2, config.eps),
    }

    history: list[LossBreakdown] = []
    n_b = len(bg)

    for it in range(config.iterations):
        frame = frames[it % len(frames)]
        posed = pose_human(human, out.mesh, frame.pose, out.alignment, out.texture)
        full_scene = merge(bg, posed)
        human_scene = _human_scene(posed)

        rendered = render(full_scene, frame.camera, raster_config)
        rendered_h = render(human_scene, frame.camera, raster_config)

        breakdown, d_full, d_humanimg = compute_loss_with_grads(
            rendered, rendered_h, frame, human, config
        )
        history.append(breakdown)

        bufs_full = render_backward(full_scene, frame.camera, d_full, raster_config)
        bufs_h = render_backward(human_scene, frame.camera, d_humanimg, raster_config)

        grads = _parameter_gradients(bg, human, posed, bufs_full, bufs_h, n_b, config)
        if config.lr_bg_rotation > 0.0:
            _add_fd_background_geometry(grads, out, frame, config, raster_config)
        for name, grad in grads.items():
            _check_finite(name, np.atleast_1d(grad))

        opts["bg_position"].step(bg.positions, grads["bg_position"])
        opts["bg_rotation"].step(bg.rotations, grads["bg_rotation"])
        opts["bg_scale"].step(bg.log_scales, grads["bg_scale"])
        opts["bg_opacity"].step(bg.opacity_logits, grads["bg_opacity"])
        opts["bg_color"].step(bg.color_logits, grads["bg_color"])
        opts["offsets"].step(human.offsets, grads["offsets"])
        opts["color"].step(human.color_grid, grads["color"])
        opts["scale"].step(human.scale_grid, grads["scale"])
        opts["opacity"].step(human.opacity_grid, grads["opacity"])
        opts["lbs"].step(human.weight_values, grads["lbs"])

        if config.lr_bg_rotation > 0.0:
            norms = np.linalg.norm(bg.rotations, axis=1, keepdims=True)
            bg.rotations /= np.maximum(norms, 1e-12)
        if config.lr_lbs_weights > 0.0:
            human.weight_values = project_rows_to_simplex(human.weight_values)

        if (
            run_dir is not None
            and config.checkpoint_every > 0
            and (it + 1) % config.checkpoint_every == 0
        ):
            save_background_ply(bg, run_dir / f"background_{it + 1:06d}.ply")
            save_human(human, run_dir / f"human_{it + 1:06d}.bin")

    if run_dir is not None:
        result = FitResult(scene=out, history=history)
        result.save_history_csv(run_dir / "loss.csv")
        save_background_ply(bg, run_dir / "background_final.ply")
        save_human(human, run_dir / "human_final.bin")
        return result
    return FitResult(scene=out, history=history)


def _parameter_gradients(bg, human, posed, bufs_full, bufs_h, n_b, config) -> dict:
    """Chain renderer gradients + regularizers into parameter space."""
    grads: dict[str, np.ndarray] = {}

    # Background (first n_b scene rows in the merged order).
    bg_colors = bg.colors
    grads["bg_color"] = bufs_full.d_color[:n_b] * bg_colors * (1.0 - bg_colors)
    grads["bg_opacity"] = bufs_full.d_opacity_logit[:n_b]
    grads["bg_position"] = bufs_full.d_position[:n_b]
    grads["bg_rotation"] = np.zeros_like(bg.rotations)
    grads["bg_scale"] = _bg_log_scale_grad(bg, bufs_full.d_cov_world[:n_b])

    # Human: contributions from the full render plus the human-only render.
    d_color = bufs_full.d_color[n_b:] + bufs_h.d_color
    d_opacity_logit = bufs_full.d_opacity_logit[n_b:] + bufs_h.d_opacity_logit
    d_position = bufs_full.d_position[n_b:] + bufs_h.d_position
    d_cov = bufs_full.d_cov_world[n_b:] + bufs_h.d_cov_world

    colors = human.colors
    n = len(human)
    grads["color"] = d_color * colors * (1.0 - colors) + (
        config.lambda4 * human.color_grid / human.color_grid.size
    )
    grads["opacity"] = d_opacity_logit + (
        config.lambda4 * human.opacity_grid / human.opacity_grid.size
    )
    grads["offsets"] = np.einsum("nji,nj->ni", posed.point_maps, d_position) + (
        config.lambda5 * 2.0 * human.offsets / human.offsets.size
    )
    # Isotropic world covariance: d/d(log scale) = 2 sum(G . V).
    grads["scale"] = 2.0 * np.einsum("nij,nij->n", d_cov, posed.covariances) + (
        config.lambda6 * 2.0 * human.scale_grid / human.scale_grid.size
    )

    # LBS weights: p_world = sum_k w~_k y_k + t with y_k the per-joint world
    # map of the canonical point and w~ the normalized row; rows return to
    # the simplex via projection after each step.
    canon_h = np.concatenate([posed.canonical_points, np.ones((n, 1))], axis=1)
    yk = np.einsum(
        "nkij,nj->nki", posed.joint_maps[human.weight_joints], canon_h
    )  # (N, K, 3)
    w_norm = human.weight_values / human.weight_values.sum(axis=1, keepdims=True)
    skinned_world = np.einsum("nk,nki->ni", w_norm, yk)
    grads["lbs"] = np.einsum("nki,ni->nk", yk - skinned_world[:, None, :], d_position)
    return grads


def _bg_log_scale_grad(bg: BackgroundGaussians, d_cov: np.ndarray) -> np.ndarray:
    """dL/d(log scale_k) = 2 e^{2 l_k} r_k^T G r_k with r_k the rotation columns."""
    from .rotations import quaternion_to_matrix

    R = quaternion_to_matrix(bg.rotations)
    quad = np.einsum("nik,nij,njl->nkl", R, d_cov, R)  # R^T G R
    diag = np.stack([quad[:, 0, 0], quad[:, 1, 1], quad[:, 2, 2]], axis=1)
    return 2.0 * np.exp(2.0 * bg.log_scales) * diag


def _add_fd_background_geometry(grads, scene, frame, config, raster_config):
    """Central finite differences for the one group without an analytic
    chain (background rotation).

    Desk-scale fallback: parameters are processed in chunks of
    ``config.fd_batch`` coordinates, two renders per coordinate.
    """
    if config.lr_bg_rotation > 0.0:
        grads["bg_rotation"] = finite_difference_gradient(
            scene.background.rotations,
            lambda: _eval_total(scene, frame, config, raster_config),
            config.fd_step,
            batch=config.fd_batch,
        )


def _eval_total(scene, frame, config, raster_config) -> float:
    posed = pose_human(scene.human, scene.mesh, frame.pose, scene.alignment, scene.texture)
    full = merge(scene.background, posed)
    rendered = render(full, frame.camera, raster_config)
    rendered_h = render(_human_scene(posed), frame.camera, raster_config)
    return compute_loss(rendered, rendered_h, frame, scene.human, config).total


def finite_difference_gradient(
    param: np.ndarray, eval_fn, h: float, batch: int = 64
) -> np.ndarray:
    """Coordinate-wise central differences, mutating ``param`` in place.

    Coordinates are processed in chunks of ``batch`` (central differences
    need two evaluations per coordinate either way; the chunking only
    bounds how much work happens between returns to the caller's loop).
    """
    grad = np.zeros_like(param)
    flat = param.reshape(-1)
    gflat = grad.reshape(-1)
    for start in range(0, flat.size, max(1, batch)):
        for i in range(start, min(start + max(1, batch), flat.size)):
            original = flat[i]
            flat[i] = original + h
            plus = eval_fn()
            flat[i] = original - h
            minus = eval_fn()
            flat[i] = original
            gflat[i] = (plus - minus) / (2.0 * h)
    return grad
