"""Scene alignment: PnP from 2D-3D joint pairs, RANSAC ground plane, and
the ray-plane scale solve.

Synthesizes a body-to-camera pose, recovers it from joint projections,
fits the ground plane of a noisy floor cloud, and solves the body scale
from the lowest joint ray.
"""

import numpy as np

from skinsplat import (
    CameraIntrinsics,
    RansacConfig,
    SceneAlignment,
    fit_ground_plane,
    project_points,
    solve_pnp,
    solve_scale,
)
from skinsplat.rotations import axis_angle_to_matrix, rotation_angle

from _common import out_dir


def main():
    out = out_dir("03_alignment")
    rng = np.random.default_rng(4)
    intr = CameraIntrinsics(fx=400.0, fy=400.0, cx=128.0, cy=128.0)

    # Ground truth: the body sits 2.8 m in front of the camera, turned 25 deg.
    R_true = axis_angle_to_matrix(np.array([0.05, np.deg2rad(25), 0.0]))
    t_true = np.array([0.1, 0.2, 2.8])
    joints = rng.uniform(-0.5, 0.5, (16, 3))
    pixels = project_points(joints, R_true, t_true, intr) + rng.normal(0, 0.5, (16, 2))

    result = solve_pnp(joints, pixels, intr)
    print(f"PnP: rotation error {np.degrees(rotation_angle(result.rotation.T @ R_true)):.3f} deg, "
          f"translation error {np.linalg.norm(result.translation - t_true) * 100:.2f} cm, "
          f"RMS {result.rms_pixels:.2f} px in {result.iterations} iterations")

    # Floor cloud in the camera frame (y points down, floor 1.6 m below eye).
    floor = np.zeros((800, 3))
    floor[:, [0, 2]] = rng.uniform([-3, 1], [3, 6], (800, 2))
    floor[:, 1] = 1.6 + rng.normal(0, 0.01, 800)
    outliers = rng.uniform([-2, -2, 1], [2, 0, 5], (60, 3))
    plane = fit_ground_plane(np.vstack([floor, outliers]), RansacConfig(seed=1))
    print(f"ground plane normal {np.round(plane.normal, 3)}, offset {plane.offset:.3f} "
          f"(true floor at y = 1.6)")

    # Scale: the camera sits at the origin of its own frame.
    joints_cam = joints @ result.rotation.T + result.translation
    scale = solve_scale(np.zeros(3), joints_cam, plane)
    print(f"body scale from the lowest-joint ray: {scale:.3f}")

    alignment = SceneAlignment(result.rotation, scale * result.translation, scale)
    alignment.save(out / "alignment.json")
    print(f"wrote {out}/alignment.json")


if __name__ == "__main__":
    main()
