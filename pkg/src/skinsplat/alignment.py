"""Body-to-scene alignment: iterative PnP from 2D-3D joint correspondences,
RANSAC ground-plane fitting, and the ray-plane scale solve.

The scale solve assumes the body is standing on the ground: each joint ray
from the camera center is intersected with the fitted plane and the smallest
positive intersection parameter becomes the body scale. Airborne poses
violate that assumption; candidates behind the camera or parallel to the
plane are discarded with a warning rather than guessed at.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PlaneFitError, PnPSolveError, ScaleSolveError
from .rotations import axis_angle_to_matrix

_PARALLEL_EPS = 1e-9


@dataclass(frozen=True)
class GroundPlane:
    """Plane a x + b y + c z + d = 0 with unit normal (a, b, c)."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if n.shape != (3,):
            raise ValueError(f"normal must be (3,), got {n.shape}")
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"normal must be unit length, |n| = {norm}")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.normal + self.offset


@dataclass(frozen=True)
class SceneAlignment:
    """Similarity transform x -> s R x + t placing body points in the scene."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be (3, 3) and translation (3,)")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-6) or np.linalg.det(R) < 0:
            raise ValueError("rotation must be orthonormal with determinant +1")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def identity(cls) -> "SceneAlignment":
        return cls(np.eye(3), np.zeros(3), 1.0)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return self.scale * (pts @ self.rotation.T) + self.translation

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneAlignment":
        return cls(
            np.asarray(doc["rotation"]), np.asarray(doc["translation"]), doc["scale"]
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "SceneAlignment":
        return cls.from_dict(json.loads(Path(path).read_text()))


def apply_alignment(alignment: SceneAlignment, points: np.ndarray) -> np.ndarray:
    """x -> s R x + t for human-space points into scene coordinates."""
    return alignment.apply(points)


# ---------------------------------------------------------------------------
# Ground plane
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 256
    # None: 2% of the cloud's bounding-box diagonal.
    inlier_threshold: float | None = None
    seed: int = 0


def fit_ground_plane(points: np.ndarray, config: RansacConfig = RansacConfig()) -> GroundPlane:
    """RANSAC over 3-point samples, least-squares refined over the inliers.

    The winner is the sample with the most inliers (ties broken by the lower
    sample index); the final normal is oriented so the majority of points lie
    on its nonnegative side.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 3:
        raise ValueError("need at least 3 points of shape (N, 3)")

    threshold = config.inlier_threshold
    if threshold is None:
        diag = np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))
        threshold = 0.02 * diag if diag > 0 else 1e-6

    rng = np.random.default_rng(config.seed)
    n = len(pts)
    best_count = -1
    best_inliers: np.ndarray | None = None
    for _ in range(config.iterations):
        idx = rng.choice(n, size=3, replace=False)
        p0, p1, p2 = pts[idx]
        normal = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = normal / norm
        dist = np.abs((pts - p0) @ normal)
        inliers = dist <= threshold
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers

    if best_inliers is None:
        raise PlaneFitError("all RANSAC samples were degenerate (collinear points)")

    return _least_squares_plane(pts[best_inliers], orient_for=pts)


def _least_squares_plane(inliers: np.ndarray, orient_for: np.ndarray) -> GroundPlane:
    centroid = inliers.mean(axis=0)
    centered = inliers - centroid
    # Normal = singular vector of the smallest singular value.
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if len(inliers) == 3 and s[1] < 1e-12:
        raise PlaneFitError("inlier set is collinear; no unique plane")
    normal = vt[-1]
    normal = normal / np.linalg.norm(normal)
    offset = -float(normal @ centroid)
    if np.count_nonzero(orient_for @ normal + offset >= 0) < len(orient_for) / 2:
        normal, offset = -normal, -offset
    return GroundPlane(normal, offset)


# ---------------------------------------------------------------------------
# Scale solve: s = -(A.C + d) / (A.(J - C)), minimum positive s over joints.
# ---------------------------------------------------------------------------


def solve_scale(
    camera_center: np.ndarray, joints: np.ndarray, plane: GroundPlane
) -> float:
    """Smallest positive ray-plane intersection parameter over all joints.

    Joints whose ray is parallel to the plane (|A.(J-C)| < 1e-9) or whose
    intersection lies behind the camera (s <= 0) are discarded.
    """
    C = np.asarray(camera_center, dtype=np.float64)
    J = np.atleast_2d(np.asarray(joints, dtype=np.float64))
    if C.shape != (3,) or J.shape[1] != 3 or len(J) < 1:
        raise ValueError("camera_center must be (3,) and joints (N, 3) with N >= 1")
    height = float(plane.normal @ C + plane.offset)
    if abs(height) < _PARALLEL_EPS:
        raise ValueError("camera center lies on the ground plane")

    denom = (J - C) @ plane.normal
    valid = np.abs(denom) >= _PARALLEL_EPS
    s = np.full(len(J), np.nan)
    s[valid] = -height / denom[valid]
    positive = valid & (s > 0)

    if not positive.any():
        raise ScaleSolveError("no joint ray intersects the ground plane in front of the camera")
    if not positive.all():
        warnings.warn(
            "some joint rays missed the ground plane (parallel or behind camera); "
            "the standing-on-ground assumption may not hold",
            stacklevel=2,
        )
    return float(s[positive].min())


# ---------------------------------------------------------------------------
# PnP via damped Gauss-Newton on pixel reprojection error.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_dict(cls, doc: dict) -> "CameraIntrinsics":
        return cls(doc["fx"], doc["fy"], doc["cx"], doc["cy"])


@dataclass(frozen=True)
class PnPResult:
    rotation: np.ndarray
    translation: np.ndarray
    rms_pixels: float
    iterations: int


def project_points(
    points: np.ndarray, R: np.ndarray, t: np.ndarray, intrinsics: CameraIntrinsics
) -> np.ndarray:
    """Pinhole projection of world points through extrinsics [R, t]."""
    cam = np.asarray(points, dtype=np.float64) @ R.T + t
    z = cam[:, 2]
    return np.stack(
        [intrinsics.fx * cam[:, 0] / z + intrinsics.cx,
         intrinsics.fy * cam[:, 1] / z + intrinsics.cy],
        axis=1,
    )


# Deterministic fallback starts for when the caller's initial guess converges
# to a high-residual local minimum: 180-degree flips about each camera axis.
_RESTART_AXES = [
    np.array([np.pi, 0.0, 0.0]),
    np.array([0.0, np.pi, 0.0]),
    np.array([0.0, 0.0, np.pi]),
]

# Above this RMS (pixels) the Gauss-Newton result is treated as a wrong-basin
# local minimum and deterministic re-initializations are tried.
_RESTART_RMS = 1.0


def _dlt_pose(X: np.ndarray, u: np.ndarray, intrinsics: CameraIntrinsics):
    """Direct linear transform initializer (needs >= 6 correspondences).

    Solves the projective 3x4 matrix in normalized camera coordinates and
    orthogonalizes its rotation block; only used to seed Gauss-Newton.
    """
    n = len(X)
    if n < 6:
        return None
    xn = np.stack(
        [(u[:, 0] - intrinsics.cx) / intrinsics.fx,
         (u[:, 1] - intrinsics.cy) / intrinsics.fy],
        axis=1,
    )
    # Hartley-style conditioning on the 3D points.
    mean = X.mean(axis=0)
    scale = np.sqrt(3.0) / max(float(np.linalg.norm(X - mean, axis=1).mean()), 1e-12)
    Xc = (X - mean) * scale

    A = np.zeros((2 * n, 12))
    Xh = np.concatenate([Xc, np.ones((n, 1))], axis=1)
    A[0::2, 0:4] = Xh
    A[0::2, 8:12] = -xn[:, 0:1] * Xh
    A[1::2, 4:8] = Xh
    A[1::2, 8:12] = -xn[:, 1:2] * Xh
    try:
        _, _, vt = np.linalg.svd(A)
    except np.linalg.LinAlgError:
        return None
    P = vt[-1].reshape(3, 4)

    M = P[:, :3]
    det = np.linalg.det(M)
    if det < 0:
        P = -P
        M = -M
    # det(M) > 0 picks the sign that places the scene in front of the camera,
    # since the true M is (scale) * R with positive determinant.
    um, sm, vmt = np.linalg.svd(M)
    if np.any(sm < 1e-12):
        return None
    R = um @ vmt
    if np.linalg.det(R) < 0:
        R = um @ np.diag([1.0, 1.0, -1.0]) @ vmt
    s = sm.mean()
    t_cond = P[:, 3] / s
    # Undo the conditioning: the conditioned camera point R(scale (X - mean))
    # + t_cond projects identically to R X + t with t below (global positive
    # rescaling of camera coordinates preserves pinhole projections).
    t = t_cond / scale - R @ mean
    return R, t


def solve_pnp(
    joints3d: np.ndarray,
    pixels2d: np.ndarray,
    intrinsics: CameraIntrinsics,
    initial_rotation: np.ndarray | None = None,
    initial_translation: np.ndarray | None = None,
    max_iterations: int = 100,
    step_tolerance: float = 1e-8,
) -> PnPResult:
    """Recover extrinsics [R, t] minimizing squared pixel reprojection error.

    Damped Gauss-Newton with backtracking: a step is only accepted if it does
    not increase the error. Defaults to the identity rotation with the body
    2 m in front of the camera when no initial guess is given.
    """
    X = np.asarray(joints3d, dtype=np.float64)
    u = np.asarray(pixels2d, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 3 or u.shape != (len(X), 2):
        raise ValueError("joints3d must be (N, 3) with matching (N, 2) pixels")
    if len(X) < 4:
        raise ValueError(f"PnP needs at least 4 correspondences, got {len(X)}")

    R0 = np.eye(3) if initial_rotation is None else np.asarray(initial_rotation, dtype=np.float64)
    t0 = np.array([0.0, 0.0, 2.0]) if initial_translation is None else np.asarray(
        initial_translation, dtype=np.float64
    )

    best = _gauss_newton(X, u, intrinsics, R0, t0, max_iterations, step_tolerance)
    if best.rms_pixels > _RESTART_RMS:
        # Wrong basin: re-seed deterministically, first from a DLT estimate,
        # then from 180-degree flips, and keep the lowest-residual answer.
        starts = []
        dlt = _dlt_pose(X, u, intrinsics)
        if dlt is not None:
            starts.append(dlt)
        centroid_depth = max(float(np.mean(X @ R0.T + t0, axis=0)[2]), 1.0)
        for axis in _RESTART_AXES:
            starts.append((axis_angle_to_matrix(axis) @ R0, np.array([0.0, 0.0, centroid_depth])))
        for Rr, tr in starts:
            cand = _gauss_newton(X, u, intrinsics, Rr, tr, max_iterations, step_tolerance)
            if cand.rms_pixels < best.rms_pixels:
                best = cand
            if best.rms_pixels <= _RESTART_RMS:
                break
    return best


def _gauss_newton(X, u, intrinsics, R, t, max_iterations, step_tolerance) -> PnPResult:
    """Gauss-Newton with gain-ratio damping (Nielsen's schedule).

    Steps are only accepted when the error does not increase, so the
    reprojection error is non-increasing across accepted iterations.
    """
    R = R.copy()
    t = t.copy()
    err = _reprojection_error(X, u, intrinsics, R, t)
    lam = None
    nu = 2.0
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        residuals, J = _residuals_jacobian(X, u, intrinsics, R, t)
        H = J.T @ J
        g = J.T @ residuals
        if lam is None:
            lam = 1e-3 * max(float(np.max(np.diag(H))), 1e-12)
        accepted = False
        step = None
        for _ in range(24):  # inflate damping until a non-increasing step exists
            try:
                step = np.linalg.solve(H + lam * np.eye(6), -g)
            except np.linalg.LinAlgError:
                raise PnPSolveError("singular normal equations (degenerate configuration)")
            R_new = axis_angle_to_matrix(step[:3]) @ R
            t_new = t + step[3:]
            err_new = _reprojection_error(X, u, intrinsics, R_new, t_new)
            if err_new <= err and np.isfinite(err_new):
                predicted = float(step @ (lam * step - g))
                rho = (err - err_new) / predicted if predicted > 0 else 1.0
                lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                accepted = True
                break
            lam *= nu
            nu *= 2.0
        if not accepted:
            break
        R, t, err = R_new, t_new, err_new
        if np.linalg.norm(step) < step_tolerance:
            break
    rms = float(np.sqrt(err / len(X)))
    return PnPResult(rotation=R, translation=t, rms_pixels=rms, iterations=iterations)


def _reprojection_error(X, u, intrinsics, R, t) -> float:
    cam = X @ R.T + t
    if np.any(cam[:, 2] <= 1e-9):
        return np.inf  # point at/behind the camera: reject this hypothesis
    proj = np.stack(
        [intrinsics.fx * cam[:, 0] / cam[:, 2] + intrinsics.cx,
         intrinsics.fy * cam[:, 1] / cam[:, 2] + intrinsics.cy],
        axis=1,
    )
    return float(((proj - u) ** 2).sum())


def _residuals_jacobian(X, u, intrinsics, R, t):
    n = len(X)
    cam = X @ R.T + t
    x, y, z = cam[:, 0], cam[:, 1], cam[:, 2]
    proj = np.stack(
        [intrinsics.fx * x / z + intrinsics.cx, intrinsics.fy * y / z + intrinsics.cy],
        axis=1,
    )
    residuals = (proj - u).reshape(-1)

    # d(pixel)/d(cam point)
    du_dp = np.zeros((n, 2, 3))
    du_dp[:, 0, 0] = intrinsics.fx / z
    du_dp[:, 0, 2] = -intrinsics.fx * x / z**2
    du_dp[:, 1, 1] = intrinsics.fy / z
    du_dp[:, 1, 2] = -intrinsics.fy * y / z**2

    # Left-multiplied rotation increment acts on R X (not on R X + t):
    # d(cam)/d(omega) = -[R X]_x.
    q = cam - t
    qx, qy, qz = q[:, 0], q[:, 1], q[:, 2]
    dp_dw = np.zeros((n, 3, 3))
    dp_dw[:, 0, 1] = qz
    dp_dw[:, 0, 2] = -qy
    dp_dw[:, 1, 0] = -qz
    dp_dw[:, 1, 2] = qx
    dp_dw[:, 2, 0] = qy
    dp_dw[:, 2, 1] = -qx

    J = np.zeros((2 * n, 6))
    J[:, :3] = np.einsum("nij,njk->nik", du_dp, dp_dw).reshape(2 * n, 3)
    J[:, 3:] = du_dp.reshape(2 * n, 3)
    return residuals, J
