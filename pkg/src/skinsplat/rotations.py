"""Rotation conversions shared across the toolkit.

All functions are vectorized over a leading batch axis where noted and
operate on float64 arrays.
"""

from __future__ import annotations

import numpy as np

# Below this angle Rodrigues' formula divides by ~0; the rotation is
# indistinguishable from the identity at double precision.
_TINY_ANGLE = 1e-8


def axis_angle_to_matrix(axis_angle: np.ndarray) -> np.ndarray:
    """Rodrigues' formula, axis-angle ``(..., 3)`` -> rotation ``(..., 3, 3)``."""
    aa = np.asarray(axis_angle, dtype=np.float64)
    theta = np.linalg.norm(aa, axis=-1, keepdims=True)
    safe = np.where(theta < _TINY_ANGLE, 1.0, theta)
    axis = aa / safe

    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    zero = np.zeros_like(x)
    K = np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )
    s = np.sin(theta)[..., None]
    c = np.cos(theta)[..., None]
    eye = np.broadcast_to(np.eye(3), K.shape)
    R = eye + s * K + (1.0 - c) * (K @ K)

    small = (theta < _TINY_ANGLE)[..., None]
    return np.where(small, eye, R)


def quaternion_to_matrix(quat: np.ndarray) -> np.ndarray:
    """Unit quaternion ``(..., 4)`` in (w, x, y, z) order -> ``(..., 3, 3)``."""
    q = np.asarray(quat, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], axis=-1),
            np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], axis=-1),
            np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], axis=-1),
        ],
        axis=-2,
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (via normalized random quaternion)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return quaternion_to_matrix(q)


def rigid_inverse(T: np.ndarray) -> np.ndarray:
    """Invert rigid 4x4 transforms ``(..., 4, 4)`` exactly (R^T, -R^T t)."""
    T = np.asarray(T, dtype=np.float64)
    R = T[..., :3, :3]
    t = T[..., :3, 3]
    out = np.zeros_like(T)
    Rt = np.swapaxes(R, -1, -2)
    out[..., :3, :3] = Rt
    out[..., :3, 3] = -np.einsum("...ij,...j->...i", Rt, t)
    out[..., 3, 3] = 1.0
    return out


def make_rigid(R: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Assemble ``(..., 4, 4)`` rigid transforms from rotation and translation."""
    R = np.asarray(R, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    shape = R.shape[:-2]
    T = np.zeros(shape + (4, 4), dtype=np.float64)
    T[..., :3, :3] = R
    T[..., :3, 3] = t
    T[..., 3, 3] = 1.0
    return T


def rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle (radians) of a single 3x3 rotation matrix."""
    tr = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.arccos(tr))
