"""Decoupled background / human Gaussian sets and the appearance-forward
pass that produces a world-space renderable scene.

Background points carry the full anisotropic parameterization (quaternion +
per-axis log scale); human points are texel-aligned grids with an isotropic
scalar scale and no rotation, matching their asymmetric roles. Human grids
(color, opacity, scale) are zero-initialized residuals around fixed base
values so that untouched attributes contribute nothing to the fit
regularizers.

Activations: sigmoid for opacity and color, exp for scale.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .alignment import SceneAlignment
from .body import Pose, SkinnedMesh, blend_matrices, pose_from_canonical
from .ply import read_ply, write_ply
from .rotations import quaternion_to_matrix
from .texture import PositionTexture, extract_points

_HG_MAGIC = b"SKINSPLAT.HGS\x00"
_HG_VERSION = 1

# 3DGS PLY interchange stores color as zeroth-order SH coefficients.
_SH_C0 = 0.28209479177387814


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def logit(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 1e-7, 1.0 - 1e-7)
    return np.log(p / (1.0 - p))


@dataclass
class BackgroundGaussians:
    """Free 3D Gaussian set: position, quaternion, log scale, opacity, color.

    ``opacity_logits`` and ``color_logits`` are the raw optimizable values;
    activated opacity lies in (0, 1) and activated color in [0, 1]^3.
    """

    positions: np.ndarray  # (N, 3)
    rotations: np.ndarray  # (N, 4) unit quaternions, (w, x, y, z)
    log_scales: np.ndarray  # (N, 3) log meters per axis
    opacity_logits: np.ndarray  # (N,)
    color_logits: np.ndarray  # (N, 3)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.rotations = np.asarray(self.rotations, dtype=np.float64)
        self.log_scales = np.asarray(self.log_scales, dtype=np.float64)
        self.opacity_logits = np.asarray(self.opacity_logits, dtype=np.float64)
        self.color_logits = np.asarray(self.color_logits, dtype=np.float64)
        n = len(self.positions)
        if (
            self.rotations.shape != (n, 4)
            or self.log_scales.shape != (n, 3)
            or self.opacity_logits.shape != (n,)
            or self.color_logits.shape != (n, 3)
        ):
            raise ValueError("background attribute arrays have inconsistent shapes")
        norms = np.linalg.norm(self.rotations, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            self.rotations = self.rotations / norms[:, None]

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def opacities(self) -> np.ndarray:
        return sigmoid(self.opacity_logits)

    @property
    def colors(self) -> np.ndarray:
        return sigmoid(self.color_logits)

    @classmethod
    def from_activated(
        cls,
        positions: np.ndarray,
        colors: np.ndarray,
        opacities: np.ndarray,
        scales: np.ndarray,
        rotations: np.ndarray | None = None,
    ) -> "BackgroundGaussians":
        n = len(positions)
        if rotations is None:
            rotations = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
        return cls(
            positions=np.asarray(positions, dtype=np.float64),
            rotations=np.asarray(rotations, dtype=np.float64),
            log_scales=np.log(np.asarray(scales, dtype=np.float64)),
            opacity_logits=logit(np.asarray(opacities, dtype=np.float64)),
            color_logits=logit(np.asarray(colors, dtype=np.float64)),
        )

    def copy(self) -> "BackgroundGaussians":
        return BackgroundGaussians(
            self.positions.copy(),
            self.rotations.copy(),
            self.log_scales.copy(),
            self.opacity_logits.copy(),
            self.color_logits.copy(),
        )


@dataclass
class HumanGaussians:
    """Texel-aligned optimizable attribute grids over a position texture.

    Grids are residuals: activated color is sigmoid(base_color_logit +
    color_grid), total log scale is base_log_scale + scale_grid (meters,
    canonical space), opacity is sigmoid(base_opacity_logit + opacity_grid).
    ``offsets`` displaces rest positions in canonical space before skinning.
    LBS weights are optimizable and renormalized to the simplex before use.
    """

    rest_positions: np.ndarray  # (N, 3), fixed, from the texture
    texel_indices: np.ndarray  # (N,), fixed texture provenance
    texture_resolution: int
    offsets: np.ndarray  # (N, 3) canonical-space delta-x
    color_grid: np.ndarray  # (N, 3) logit residuals
    scale_grid: np.ndarray  # (N,) log-scale residuals
    opacity_grid: np.ndarray  # (N,) logit residuals
    weight_joints: np.ndarray  # (N, K)
    weight_values: np.ndarray  # (N, K)
    base_color_logit: float = 0.0  # gray
    base_opacity_logit: float = 2.0  # ~0.88, near-solid surface
    base_log_scale: float = -4.0  # ~1.8 cm radius

    def __post_init__(self):
        self.rest_positions = np.asarray(self.rest_positions, dtype=np.float64)
        self.weight_joints = np.asarray(self.weight_joints, dtype=np.int64)
        self.weight_values = np.asarray(self.weight_values, dtype=np.float64)
        n = len(self.rest_positions)
        shapes = {
            "offsets": (n, 3),
            "color_grid": (n, 3),
            "scale_grid": (n,),
            "opacity_grid": (n,),
            "texel_indices": (n,),
        }
        for name, shape in shapes.items():
            dtype = np.int64 if name == "texel_indices" else np.float64
            arr = np.asarray(getattr(self, name), dtype=dtype)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            setattr(self, name, arr)
        if self.weight_joints.shape != self.weight_values.shape or len(self.weight_joints) != n:
            raise ValueError("LBS weight arrays must be (N, K) matching the texel count")

    def __len__(self) -> int:
        return len(self.rest_positions)

    @property
    def colors(self) -> np.ndarray:
        return sigmoid(self.base_color_logit + self.color_grid)

    @property
    def opacities(self) -> np.ndarray:
        return sigmoid(self.base_opacity_logit + self.opacity_grid)

    @property
    def log_scales(self) -> np.ndarray:
        """Total canonical-space log scale per point."""
        return self.base_log_scale + self.scale_grid

    def normalized_weights(self) -> tuple[np.ndarray, np.ndarray]:
        sums = self.weight_values.sum(axis=1, keepdims=True)
        if np.any(sums <= 0):
            raise ValueError("human LBS weight rows must have positive mass")
        return self.weight_joints, self.weight_values / sums

    @classmethod
    def from_texture(
        cls,
        texture: PositionTexture,
        base_color_logit: float = 0.0,
        base_opacity_logit: float = 2.0,
        base_log_scale: float | None = None,
    ) -> "HumanGaussians":
        """Zero-residual initialization over the texture's valid texels.

        The default base scale is derived from the texel density: roughly the
        body surface spacing, so neighboring splats just overlap.
        """
        pts = extract_points(texture)
        n = len(pts.positions)
        if base_log_scale is None:
            bbox = pts.positions.max(axis=0) - pts.positions.min(axis=0)
            area = 2.0 * (bbox[0] * bbox[1] + bbox[1] * bbox[2] + bbox[0] * bbox[2])
            spacing = np.sqrt(max(area, 1e-12) / max(n, 1))
            base_log_scale = float(np.log(max(spacing, 1e-6)))
        return cls(
            rest_positions=pts.positions,
            texel_indices=pts.texel_indices,
            texture_resolution=texture.width,
            offsets=np.zeros((n, 3)),
            color_grid=np.zeros((n, 3)),
            scale_grid=np.zeros(n),
            opacity_grid=np.zeros(n),
            weight_joints=pts.weight_joints.copy(),
            weight_values=pts.weight_values.copy(),
            base_color_logit=base_color_logit,
            base_opacity_logit=base_opacity_logit,
            base_log_scale=base_log_scale,
        )

    def copy(self) -> "HumanGaussians":
        return replace(
            self,
            offsets=self.offsets.copy(),
            color_grid=self.color_grid.copy(),
            scale_grid=self.scale_grid.copy(),
            opacity_grid=self.opacity_grid.copy(),
            weight_joints=self.weight_joints.copy(),
            weight_values=self.weight_values.copy(),
        )


@dataclass(frozen=True)
class PosedHuman:
    """World-space human Gaussians plus the linear maps used by gradients.

    ``point_maps`` holds d(world position)/d(canonical point) = s R M[:3, :3]
    per point; ``joint_maps`` is the per-joint world map s R T_j used for the
    LBS-weight chain.
    """

    positions: np.ndarray  # (N, 3) world space
    covariances: np.ndarray  # (N, 3, 3) world space, isotropic
    opacities: np.ndarray  # (N,)
    colors: np.ndarray  # (N, 3)
    world_log_scales: np.ndarray  # (N,) log(exp(s_h) * s_alignment)
    point_maps: np.ndarray  # (N, 3, 3)
    joint_maps: np.ndarray  # (m, 3, 4)
    canonical_points: np.ndarray  # (N, 3) rest + offset


def pose_human(
    human: HumanGaussians,
    mesh: SkinnedMesh,
    pose: Pose,
    alignment: SceneAlignment,
    texture: PositionTexture | None = None,
) -> PosedHuman:
    """Skin the canonical human points into the scene.

    Canonical positions rest + offset are LBS-transformed by the composite
    Da-pose chain and mapped by the alignment. Covariances are isotropic:
    (exp(log scale) * alignment scale)^2 I.
    """
    if texture is not None and len(human) != texture.num_valid:
        raise ValueError(
            f"human grids cover {len(human)} texels, texture has {texture.num_valid}"
        )
    if pose.num_joints != mesh.num_joints:
        raise ValueError("pose joint count does not match mesh")

    transforms = pose_from_canonical(mesh, pose)
    wj, wv = human.normalized_weights()
    M = blend_matrices(wj, wv, transforms)  # (N, 4, 4)

    canonical = human.rest_positions + human.offsets
    skinned = np.einsum("nij,nj->ni", M[:, :3, :3], canonical) + M[:, :3, 3]
    world = alignment.apply(skinned)

    world_log_scales = human.log_scales + np.log(alignment.scale)
    var = np.exp(2.0 * world_log_scales)
    covariances = var[:, None, None] * np.eye(3)[None]

    sR = alignment.scale * alignment.rotation
    point_maps = np.einsum("ij,njk->nik", sR, M[:, :3, :3])
    joint_maps = np.einsum("ij,mjk->mik", sR, transforms.matrices[:, :3, :])

    return PosedHuman(
        positions=world,
        covariances=covariances,
        opacities=human.opacities,
        colors=human.colors,
        world_log_scales=world_log_scales,
        point_maps=point_maps,
        joint_maps=joint_maps,
        canonical_points=canonical,
    )


def build_covariance(rotation: np.ndarray, log_scale: np.ndarray) -> np.ndarray:
    """V = R diag(exp(2 log_scale)) R^T for one quaternion/scale pair."""
    R = quaternion_to_matrix(np.asarray(rotation, dtype=np.float64))
    return (R * np.exp(2.0 * np.asarray(log_scale, dtype=np.float64))) @ R.T


def build_covariances(rotations: np.ndarray, log_scales: np.ndarray) -> np.ndarray:
    """Batched :func:`build_covariance` for (N, 4) quaternions, (N, 3) scales."""
    R = quaternion_to_matrix(np.asarray(rotations, dtype=np.float64))
    S = np.exp(2.0 * np.asarray(log_scales, dtype=np.float64))
    return np.einsum("nij,nj,nkj->nik", R, S, R)


@dataclass(frozen=True)
class RenderableScene:
    """Flat world-space Gaussian arrays; background points precede human."""

    positions: np.ndarray
    covariances: np.ndarray
    opacities: np.ndarray
    colors: np.ndarray
    is_human: np.ndarray

    def __post_init__(self):
        n = len(self.positions)
        if not (
            self.covariances.shape == (n, 3, 3)
            and self.opacities.shape == (n,)
            and self.colors.shape == (n, 3)
            and self.is_human.shape == (n,)
        ):
            raise ValueError("scene arrays have inconsistent shapes")

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def num_background(self) -> int:
        return int((~self.is_human).sum())

    @property
    def num_human(self) -> int:
        return int(self.is_human.sum())

    def validate_covariances(self, tol: float = 1e-8) -> None:
        sym_err = np.abs(self.covariances - np.swapaxes(self.covariances, 1, 2)).max()
        if sym_err > tol:
            raise ValueError(f"covariances not symmetric (max error {sym_err:g})")
        eigvals = np.linalg.eigvalsh(self.covariances)
        if eigvals.min() < -tol:
            raise ValueError(f"covariance not PSD (min eigenvalue {eigvals.min():g})")


def background_scene(background: BackgroundGaussians) -> RenderableScene:
    n = len(background)
    return RenderableScene(
        positions=background.positions.copy(),
        covariances=build_covariances(background.rotations, background.log_scales),
        opacities=background.opacities,
        colors=background.colors,
        is_human=np.zeros(n, dtype=bool),
    )


def merge(background: BackgroundGaussians, posed_human: PosedHuman) -> RenderableScene:
    """Concatenate background and posed human sets, preserving origin tags.

    Background points come first, so scene index i < len(background) maps back
    to the background set and the remainder maps to texel order.
    """
    bg = background_scene(background)
    n_h = len(posed_human.positions)
    return RenderableScene(
        positions=np.concatenate([bg.positions, posed_human.positions]),
        covariances=np.concatenate([bg.covariances, posed_human.covariances]),
        opacities=np.concatenate([bg.opacities, posed_human.opacities]),
        colors=np.concatenate([bg.colors, posed_human.colors]),
        is_human=np.concatenate([bg.is_human, np.ones(n_h, dtype=bool)]),
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_background_ply(background: BackgroundGaussians, path: str | Path) -> None:
    """3DGS-compatible attribute PLY (f_dc color, logit opacity, log scale)."""
    dc = (background.colors - 0.5) / _SH_C0
    props = {
        "x": background.positions[:, 0],
        "y": background.positions[:, 1],
        "z": background.positions[:, 2],
        "f_dc_0": dc[:, 0],
        "f_dc_1": dc[:, 1],
        "f_dc_2": dc[:, 2],
        "opacity": background.opacity_logits,
        "scale_0": background.log_scales[:, 0],
        "scale_1": background.log_scales[:, 1],
        "scale_2": background.log_scales[:, 2],
        "rot_0": background.rotations[:, 0],
        "rot_1": background.rotations[:, 1],
        "rot_2": background.rotations[:, 2],
        "rot_3": background.rotations[:, 3],
    }
    write_ply(path, props)


def load_background_ply(path: str | Path) -> BackgroundGaussians:
    data = read_ply(path)
    positions = np.stack([data["x"], data["y"], data["z"]], axis=1)
    n = len(positions)
    if "f_dc_0" in data:
        colors = np.clip(
            np.stack([data["f_dc_0"], data["f_dc_1"], data["f_dc_2"]], axis=1) * _SH_C0 + 0.5,
            0.0,
            1.0,
        )
        color_logits = logit(colors)
    elif "red" in data:
        color_logits = logit(np.stack([data["red"], data["green"], data["blue"]], axis=1) / 255.0)
    else:
        color_logits = np.zeros((n, 3))
    opacity_logits = data.get("opacity", np.full(n, logit(np.asarray(0.7))))
    if "scale_0" in data:
        log_scales = np.stack([data["scale_0"], data["scale_1"], data["scale_2"]], axis=1)
    else:
        log_scales = np.full((n, 3), -4.0)
    if "rot_0" in data:
        rotations = np.stack([data[f"rot_{i}"] for i in range(4)], axis=1)
    else:
        rotations = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    return BackgroundGaussians(
        positions=positions,
        rotations=rotations,
        log_scales=log_scales,
        opacity_logits=np.asarray(opacity_logits, dtype=np.float64),
        color_logits=color_logits,
    )


def save_combined_ply(scene: RenderableScene, path: str | Path) -> None:
    """Interchange export of a merged scene as an isotropically-approximated
    3DGS PLY (mean log-scale per point, identity rotation)."""
    eig = np.linalg.eigvalsh(scene.covariances)
    log_scales = 0.5 * np.log(np.maximum(eig, 1e-18))
    dc = (scene.colors - 0.5) / _SH_C0
    n = len(scene)
    props = {
        "x": scene.positions[:, 0],
        "y": scene.positions[:, 1],
        "z": scene.positions[:, 2],
        "f_dc_0": dc[:, 0],
        "f_dc_1": dc[:, 1],
        "f_dc_2": dc[:, 2],
        "opacity": logit(scene.opacities),
        "scale_0": log_scales[:, 0],
        "scale_1": log_scales[:, 1],
        "scale_2": log_scales[:, 2],
        "rot_0": np.ones(n),
        "rot_1": np.zeros(n),
        "rot_2": np.zeros(n),
        "rot_3": np.zeros(n),
        "is_human": scene.is_human.astype(np.uint8),
    }
    write_ply(path, props, dtypes={"is_human": "uchar"})


def save_human(human: HumanGaussians, path: str | Path) -> None:
    """Binary human-attribute file keyed by texture resolution + texel count."""
    with open(path, "wb") as f:
        f.write(_HG_MAGIC)
        f.write(struct.pack("<H", _HG_VERSION))
        k = human.weight_values.shape[1]
        f.write(struct.pack("<IQI", human.texture_resolution, len(human), k))
        f.write(
            struct.pack(
                "<ddd",
                human.base_color_logit,
                human.base_opacity_logit,
                human.base_log_scale,
            )
        )
        f.write(human.texel_indices.astype("<i8").tobytes())
        f.write(human.rest_positions.astype("<f8").tobytes())
        f.write(human.offsets.astype("<f8").tobytes())
        f.write(human.color_grid.astype("<f8").tobytes())
        f.write(human.scale_grid.astype("<f8").tobytes())
        f.write(human.opacity_grid.astype("<f8").tobytes())
        f.write(human.weight_joints.astype("<i4").tobytes())
        f.write(human.weight_values.astype("<f8").tobytes())


def load_human(path: str | Path, texture: PositionTexture | None = None) -> HumanGaussians:
    with open(path, "rb") as f:
        if f.read(14) != _HG_MAGIC:
            raise ValueError(f"{path}: not a human attribute file")
        (version,) = struct.unpack("<H", f.read(2))
        if version != _HG_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        resolution, n, k = struct.unpack("<IQI", f.read(16))
        base_color, base_opacity, base_scale = struct.unpack("<ddd", f.read(24))

        def read(dtype, shape):
            count = int(np.prod(shape))
            arr = np.frombuffer(f.read(count * np.dtype(dtype).itemsize), dtype=dtype)
            return arr.reshape(shape).copy()

        human = HumanGaussians(
            texel_indices=read("<i8", (n,)),
            rest_positions=read("<f8", (n, 3)),
            offsets=read("<f8", (n, 3)),
            color_grid=read("<f8", (n, 3)),
            scale_grid=read("<f8", (n,)),
            opacity_grid=read("<f8", (n,)),
            weight_joints=read("<i4", (n, k)).astype(np.int64),
            weight_values=read("<f8", (n, k)),
            texture_resolution=resolution,
            base_color_logit=base_color,
            base_opacity_logit=base_opacity,
            base_log_scale=base_scale,
        )
    if texture is not None:
        if texture.width != resolution or texture.num_valid != n:
            raise ValueError(
                f"{path}: keyed to resolution {resolution} / {n} texels, but texture "
                f"is {texture.width} / {texture.num_valid}"
            )
        if not np.array_equal(texture.texel_indices, human.texel_indices):
            raise ValueError(f"{path}: texel layout does not match the texture")
    return human
