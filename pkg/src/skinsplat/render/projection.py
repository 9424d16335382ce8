"""EWA projection of 3D Gaussians to screen space, with the reverse chain
from screen-space gradients back to world position and covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..scene import RenderableScene
from .camera import Camera
from .config import DEFAULT_CONFIG, RasterConfig


@dataclass(frozen=True)
class ProjectedSplats:
    """Screen-space splats for the Gaussians that survived near-plane culling.

    ``scene_indices`` maps each splat row back to its Gaussian in the scene.
    """

    means2d: np.ndarray  # (M, 2) pixels
    cov2d: np.ndarray  # (M, 2, 2) pixels^2, dilation included
    depths: np.ndarray  # (M,) camera-space z
    colors: np.ndarray  # (M, 3)
    opacities: np.ndarray  # (M,)
    scene_indices: np.ndarray  # (M,) int
    cam_points: np.ndarray  # (M, 3) camera-space positions (for the backward chain)
    is_human: np.ndarray  # (M,) bool


def project(
    scene: RenderableScene, camera: Camera, config: RasterConfig = DEFAULT_CONFIG
) -> ProjectedSplats:
    """Project scene Gaussians into camera pixels.

    Gaussians with camera-space z <= near are culled, as are Gaussians far
    outside the view frustum (beyond 1.3x the frustum tangents): the EWA
    affine approximation degenerates at extreme off-axis angles and would
    smear such points across the image. The projected covariance is
    J W V W^T J^T with W the camera rotation and J the perspective Jacobian
    at the point, plus an isotropic dilation.
    """
    cam = camera.world_to_camera(scene.positions)
    z_all = cam[:, 2]
    safe_z = np.where(z_all > camera.near, z_all, 1.0)
    tan_x = 1.3 * max(camera.cx, camera.width - camera.cx) / camera.fx
    tan_y = 1.3 * max(camera.cy, camera.height - camera.cy) / camera.fy
    keep = (
        (z_all > camera.near)
        & (np.abs(cam[:, 0] / safe_z) <= tan_x)
        & (np.abs(cam[:, 1] / safe_z) <= tan_y)
    )
    idx = np.flatnonzero(keep)
    cam = cam[idx]

    x, y, z = cam[:, 0], cam[:, 1], cam[:, 2]
    means2d = np.stack(
        [camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy], axis=1
    )

    J = perspective_jacobian(cam, camera)  # (M, 2, 3)
    A = J @ camera.rotation  # (M, 2, 3)
    cov2d = np.einsum("mij,mjk,mlk->mil", A, scene.covariances[idx], A)
    cov2d[:, 0, 0] += config.cov2d_dilation
    cov2d[:, 1, 1] += config.cov2d_dilation

    return ProjectedSplats(
        means2d=means2d,
        cov2d=cov2d,
        depths=z.copy(),
        colors=scene.colors[idx],
        opacities=scene.opacities[idx],
        scene_indices=idx,
        cam_points=cam,
        is_human=scene.is_human[idx],
    )


def perspective_jacobian(cam_points: np.ndarray, camera: Camera) -> np.ndarray:
    """d(pixel)/d(camera point) at each point, (M, 2, 3)."""
    x, y, z = cam_points[:, 0], cam_points[:, 1], cam_points[:, 2]
    m = len(cam_points)
    J = np.zeros((m, 2, 3))
    J[:, 0, 0] = camera.fx / z
    J[:, 0, 2] = -camera.fx * x / z**2
    J[:, 1, 1] = camera.fy / z
    J[:, 1, 2] = -camera.fy * y / z**2
    return J


def backproject_gradients(
    scene: RenderableScene,
    camera: Camera,
    splats: ProjectedSplats,
    d_mean2d: np.ndarray,
    d_cov2d: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Chain screen-space gradients to world position and world covariance.

    ``d_cov2d`` uses the full-matrix convention (every entry an independent
    variable; symmetric inputs produce symmetric gradients). The returned
    ``d_position`` includes both the mean path and the covariance path
    through the perspective Jacobian; the depth-sort order is treated as
    locally constant, as is standard for splatting gradients.
    """
    cam = splats.cam_points
    x, y, z = cam[:, 0], cam[:, 1], cam[:, 2]
    J = perspective_jacobian(cam, camera)
    A = J @ camera.rotation  # (M, 2, 3)

    # Mean path: d pixel / d cam = J.
    d_cam = np.einsum("mij,mi->mj", J, d_mean2d)

    # Covariance path: cov2d = A V A^T; dL/dV = A^T G A.
    d_cov_cam = np.einsum("mij,mik,mkl->mjl", A, d_cov2d, A)
    # Map to world covariance: V appears directly (world frame), A includes W.
    d_cov_world = np.zeros((len(scene), 3, 3))
    np.add.at(d_cov_world, splats.scene_indices, d_cov_cam)

    # Covariance path into the position: J depends on the camera point.
    # dJ/d(cam_k) is sparse; accumulate sum(G . (B_k + B_k^T)) with
    # B_k = (dJ_k W) V (J W)^T and V the world covariance.
    V = scene.covariances[splats.scene_indices]
    VAt = np.einsum("mjk,mlk->mjl", V, A)  # V (J W)^T, (M, 3, 2)
    fx, fy = camera.fx, camera.fy
    z2 = z**2
    z3 = z**3

    dJ = np.zeros((len(cam), 3, 2, 3))  # [point, d/dcam_k, row, col]
    dJ[:, 0, 0, 2] = -fx / z2  # dJ02/dx
    dJ[:, 1, 1, 2] = -fy / z2  # dJ12/dy
    dJ[:, 2, 0, 0] = -fx / z2  # dJ00/dz
    dJ[:, 2, 1, 1] = -fy / z2  # dJ11/dz
    dJ[:, 2, 0, 2] = 2.0 * fx * x / z3  # dJ02/dz
    dJ[:, 2, 1, 2] = 2.0 * fy * y / z3  # dJ12/dz

    # B_k[i, l] = ((dJ_k W) V (J W)^T)[i, l]
    B = np.einsum("mkij,mjl->mkil", dJ @ camera.rotation, VAt)  # (M, 3, 2, 2)
    d_cam += np.einsum("mil,mkil->mk", d_cov2d, B + np.swapaxes(B, 2, 3))

    d_position = np.zeros((len(scene), 3))
    np.add.at(d_position, splats.scene_indices, d_cam @ camera.rotation)
    return d_position, d_cov_world
