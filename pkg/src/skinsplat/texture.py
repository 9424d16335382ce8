"""Position-texture baking: rasterize the skinned mesh into UV space and
grow a dense surface point set.

Every valid texel stores the rest-pose position, skinning weights, and
provenance (source triangle + barycentric coordinates) interpolated at the
texel center. Texels covered by several UV triangles resolve to the lowest
triangle index, which makes bakes deterministic across runs and platforms.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .body import SkinnedMesh
from .errors import EmptyTextureError

_PTEX_MAGIC = b"SKINSPLAT.PTX\x00"  # 14 bytes; +uint16 version = 16-byte header
_PTEX_VERSION = 1

# Texel centers exactly on a shared UV edge can fall out of both triangles
# by one ulp; this slack readmits them without admitting exterior centers.
_EDGE_EPS = 1e-12


@dataclass(frozen=True)
class PositionTexture:
    """Baked H x W position texture over the valid-texel subset.

    Per-valid-texel arrays are stored densely in row-major texel order:
    ``texel_indices[i] = v * width + u``.
    """

    width: int
    height: int
    texel_indices: np.ndarray  # (N,) int64, row-major, strictly increasing
    positions: np.ndarray  # (N, 3) rest-pose points
    triangle_ids: np.ndarray  # (N,) source triangle per texel
    barycentrics: np.ndarray  # (N, 3) nonnegative, rows sum to 1
    weight_joints: np.ndarray  # (N, K)
    weight_values: np.ndarray  # (N, K), rows sum to 1

    @property
    def num_valid(self) -> int:
        return len(self.texel_indices)

    def valid_mask(self) -> np.ndarray:
        mask = np.zeros(self.height * self.width, dtype=bool)
        mask[self.texel_indices] = True
        return mask.reshape(self.height, self.width)

    def texel_coords(self) -> np.ndarray:
        """(N, 2) integer (u, v) coordinates of the valid texels."""
        v, u = np.divmod(self.texel_indices, self.width)
        return np.stack([u, v], axis=1)


@dataclass(frozen=True)
class DensePoints:
    """Extraction result: one surface point per valid texel, texel-keyed."""

    positions: np.ndarray
    weight_joints: np.ndarray
    weight_values: np.ndarray
    texel_indices: np.ndarray


def texel_centers(width: int, height: int) -> np.ndarray:
    """UV coordinates of all texel centers, (H*W, 2) row-major."""
    us = (np.arange(width) + 0.5) / width
    vs = (np.arange(height) + 0.5) / height
    uu, vv = np.meshgrid(us, vs)
    return np.stack([uu.ravel(), vv.ravel()], axis=1)


def interpolate_position(
    mesh: SkinnedMesh, triangle_ids: np.ndarray, barycentrics: np.ndarray
) -> np.ndarray:
    """Barycentric combination of the source triangles' rest vertices.

    Used both by the baker and by the reprojection invariant check; the two
    must share this exact evaluation order for bit-for-bit agreement.
    """
    corners = mesh.vertices[mesh.triangles[triangle_ids]]  # (N, 3, 3)
    return np.einsum("nc,ncd->nd", barycentrics, corners)


def bake(mesh: SkinnedMesh, resolution: int) -> PositionTexture:
    """Rasterize the mesh's UV layout at ``resolution`` texels per side.

    A texel is valid iff its center lies inside at least one UV triangle;
    attributes are barycentric interpolations of that triangle's vertex data.
    """
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    W = H = int(resolution)

    owner = np.full(H * W, -1, dtype=np.int64)  # claiming triangle per texel
    bary_grid = np.zeros((H * W, 3))

    uv0 = mesh.uvs[:, 0, :]
    edge1 = mesh.uvs[:, 1, :] - uv0
    edge2 = mesh.uvs[:, 2, :] - uv0
    det = edge1[:, 0] * edge2[:, 1] - edge1[:, 1] * edge2[:, 0]

    any_area = False
    for t in range(len(mesh.triangles)):
        if det[t] == 0.0:  # zero UV area: cannot claim texels
            continue
        any_area = True
        u_min, v_min = mesh.uvs[t].min(axis=0)
        u_max, v_max = mesh.uvs[t].max(axis=0)
        # Texel columns whose centers (u+0.5)/W fall inside the UV bbox.
        c0 = max(0, int(np.floor(u_min * W - 0.5)))
        c1 = min(W - 1, int(np.ceil(u_max * W - 0.5)))
        r0 = max(0, int(np.floor(v_min * H - 0.5)))
        r1 = min(H - 1, int(np.ceil(v_max * H - 0.5)))
        if c1 < c0 or r1 < r0:
            continue
        cols = np.arange(c0, c1 + 1)
        rows = np.arange(r0, r1 + 1)
        cu = (cols + 0.5) / W
        rv = (rows + 0.5) / H
        gu, gv = np.meshgrid(cu, rv)
        du = gu - uv0[t, 0]
        dv = gv - uv0[t, 1]
        b1 = (du * edge2[t, 1] - dv * edge2[t, 0]) / det[t]
        b2 = (dv * edge1[t, 0] - du * edge1[t, 1]) / det[t]
        b0 = 1.0 - b1 - b2
        inside = (b0 >= -_EDGE_EPS) & (b1 >= -_EDGE_EPS) & (b2 >= -_EDGE_EPS)
        if not inside.any():
            continue
        gr, gc = np.meshgrid(rows, cols, indexing="ij")
        flat = (gr * W + gc)[inside]
        unclaimed = owner[flat] < 0  # earlier (lower-index) triangles win
        flat = flat[unclaimed]
        if flat.size == 0:
            continue
        owner[flat] = t
        b = np.stack([b0[inside][unclaimed], b1[inside][unclaimed], b2[inside][unclaimed]], axis=1)
        np.clip(b, 0.0, 1.0, out=b)
        bary_grid[flat] = b / b.sum(axis=1, keepdims=True)

    if not any_area:
        raise EmptyTextureError("mesh has only zero-UV-area triangles")

    texel_idx = np.flatnonzero(owner >= 0)
    if texel_idx.size == 0:
        raise EmptyTextureError(f"no texel center falls inside any UV triangle at {W}x{H}")

    tri_ids = owner[texel_idx]
    bary = bary_grid[texel_idx]
    positions = interpolate_position(mesh, tri_ids, bary)
    wj, wv = _interpolate_weights(mesh, tri_ids, bary)

    return PositionTexture(
        width=W,
        height=H,
        texel_indices=texel_idx,
        positions=positions,
        triangle_ids=tri_ids,
        barycentrics=bary,
        weight_joints=wj,
        weight_values=wv,
    )


def _interpolate_weights(
    mesh: SkinnedMesh, tri_ids: np.ndarray, bary: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Blend sparse vertex weights over the union of the corners' joint sets."""
    corner_vids = mesh.triangles[tri_ids]  # (N, 3)
    cj = mesh.weight_joints[corner_vids]  # (N, 3, K)
    cv = mesh.weight_values[corner_vids] * bary[:, :, None]  # (N, 3, K)

    n, _, k = cj.shape
    flat_j = cj.reshape(n, 3 * k)
    flat_v = cv.reshape(n, 3 * k)

    # Dense scatter over joints, then re-sparsify to the union support.
    m = mesh.num_joints
    dense = np.zeros((n, m))
    np.add.at(dense, (np.repeat(np.arange(n), 3 * k), flat_j.ravel()), flat_v.ravel())

    max_support = int((dense > 0.0).sum(axis=1).max())
    order = np.argsort(-dense, axis=1, kind="stable")[:, :max_support]
    values = np.take_along_axis(dense, order, axis=1)
    joints = order.astype(np.int64)
    joints[values <= 0.0] = 0
    values[values <= 0.0] = 0.0
    values /= values.sum(axis=1, keepdims=True)
    return joints, values


def extract_points(texture: PositionTexture) -> DensePoints:
    """One point per valid texel, in row-major texel order.

    The texel index travels with each point as the stable key for
    texel-aligned attribute grids.
    """
    if texture.num_valid < 1:
        raise ValueError("texture has no valid texels")
    return DensePoints(
        positions=texture.positions.copy(),
        weight_joints=texture.weight_joints.copy(),
        weight_values=texture.weight_values.copy(),
        texel_indices=texture.texel_indices.copy(),
    )


# ---------------------------------------------------------------------------
# Persistence: little-endian binary with a 16-byte magic/version header.
# Layout documented in docs/formats.md.
# ---------------------------------------------------------------------------


def save_texture(texture: PositionTexture, path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(_PTEX_MAGIC)
        f.write(struct.pack("<H", _PTEX_VERSION))
        k = texture.weight_values.shape[1]
        f.write(
            struct.pack(
                "<IIQI", texture.width, texture.height, texture.num_valid, k
            )
        )
        f.write(texture.texel_indices.astype("<i8").tobytes())
        f.write(texture.positions.astype("<f8").tobytes())
        f.write(texture.triangle_ids.astype("<i8").tobytes())
        f.write(texture.barycentrics.astype("<f8").tobytes())
        f.write(texture.weight_joints.astype("<i4").tobytes())
        f.write(texture.weight_values.astype("<f8").tobytes())


def load_texture(path: str | Path) -> PositionTexture:
    with open(path, "rb") as f:
        magic = f.read(14)
        if magic != _PTEX_MAGIC:
            raise ValueError(f"{path}: not a position texture file")
        (version,) = struct.unpack("<H", f.read(2))
        if version != _PTEX_VERSION:
            raise ValueError(f"{path}: unsupported texture version {version}")
        width, height, n, k = struct.unpack("<IIQI", f.read(20))

        def read(dtype, shape):
            count = int(np.prod(shape))
            arr = np.frombuffer(f.read(count * np.dtype(dtype).itemsize), dtype=dtype)
            return arr.reshape(shape).copy()

        return PositionTexture(
            width=width,
            height=height,
            texel_indices=read("<i8", (n,)),
            positions=read("<f8", (n, 3)),
            triangle_ids=read("<i8", (n,)),
            barycentrics=read("<f8", (n, 3)),
            weight_joints=read("<i4", (n, k)).astype(np.int64),
            weight_values=read("<f8", (n, k)),
        )


def save_texture_png(texture: PositionTexture, path: str | Path) -> None:
    """Debug visualization: positions normalized to RGB over valid texels."""
    from PIL import Image as PILImage

    rgb = np.zeros((texture.height * texture.width, 3))
    lo = texture.positions.min(axis=0)
    hi = texture.positions.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    rgb[texture.texel_indices] = (texture.positions - lo) / span
    img = (rgb.reshape(texture.height, texture.width, 3) * 255).round().astype(np.uint8)
    PILImage.fromarray(img).save(path)
