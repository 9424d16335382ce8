"""Synthetic ground-truth scene fixtures shared across test modules.

The fit fixture builds a ground-truth scene (textured toy body over a
colored background shell), renders target frames from a camera ring, and
pairs it with a neutral-initialization copy whose colors/opacities must be
recovered by optimization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from skinsplat.alignment import SceneAlignment
from skinsplat.body import Pose
from skinsplat.fit import FitScene, Frame
from skinsplat.fit_io import save_frame
from skinsplat.render import Camera, render, render_human_only
from skinsplat.samples import make_test_body, make_test_pose
from skinsplat.scene import (
    BackgroundGaussians,
    HumanGaussians,
    logit,
    merge,
    pose_human,
)
from skinsplat.texture import bake


@dataclass
class SyntheticSetup:
    truth: FitScene
    initial: FitScene
    frames: list[Frame]
    holdout: Frame
    pose: Pose


def ring_camera(index, count, center, radius=3.0, height=1.35, size=64, phase=0.0):
    angle = 2 * np.pi * index / count + phase
    eye = center + np.array([radius * np.sin(angle), height - center[1], radius * np.cos(angle)])
    return Camera.looking_at(eye=eye, target=center, fov_deg=55.0, width=size, height=size)


def observed_mask(background, cameras, min_views=2):
    """Which background points land inside at least ``min_views`` frusta."""
    counts = np.zeros(len(background), dtype=int)
    for cam in cameras:
        cam_pts = background.positions @ cam.rotation.T + cam.translation
        z = cam_pts[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = cam.fx * cam_pts[:, 0] / z + cam.cx
            v = cam.fy * cam_pts[:, 1] / z + cam.cy
        inside = (z > cam.near) & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
        counts += inside
    return counts >= min_views


def make_background_shell(rng, n=500, center=None, radius=4.2):
    """Colored points on a cylinder shell plus a ground annulus.

    Splat sizes are kept small relative to the camera-body distance so the
    body is never fogged out by foreground ground splats; the annulus leaves
    the body's footprint clear.
    """
    center = np.zeros(3) if center is None else center
    n_wall = int(n * 0.7)
    angles = rng.uniform(0, 2 * np.pi, n_wall)
    heights = rng.uniform(-0.2, 2.6, n_wall)
    wall = np.stack(
        [radius * np.sin(angles), heights, radius * np.cos(angles)], axis=1
    ) + center * np.array([1.0, 0.0, 1.0])
    wall_scales = rng.uniform(0.20, 0.32, n_wall)
    # Ground annulus stays inside the camera ring (radius 3.0) so no splat
    # ever sits next to a camera and fogs the frame.
    n_disk = n - n_wall
    disk_r = np.sqrt(rng.uniform(0, 1, n_disk)) * 1.1 + 0.9
    disk_a = rng.uniform(0, 2 * np.pi, n_disk)
    disk = np.stack(
        [disk_r * np.sin(disk_a), np.zeros(n_disk), disk_r * np.cos(disk_a)], axis=1
    )
    disk_scales = rng.uniform(0.06, 0.11, n_disk)
    positions = np.vstack([wall, disk])
    scales = np.concatenate([wall_scales, disk_scales])
    return BackgroundGaussians.from_activated(
        positions=positions,
        colors=rng.uniform(0.15, 0.85, (n, 3)),
        opacities=np.full(n, 0.98),
        scales=np.tile(scales[:, None], (1, 3)),
    )


def make_synthetic_setup(
    seed: int = 0,
    resolution: int = 96,
    num_cameras: int = 9,
    image_size: int = 64,
    color_sigma: float = 0.45,
    n_background: int = 500,
) -> SyntheticSetup:
    rng = np.random.default_rng(seed)
    mesh = make_test_body()
    texture = bake(mesh, resolution)

    truth_human = HumanGaussians.from_texture(texture, base_opacity_logit=3.0)
    truth_human.color_grid[:] = np.clip(
        rng.normal(0.0, color_sigma, truth_human.color_grid.shape), -1.2, 1.2
    )

    body_center = np.array([0.0, 1.0, 0.0])
    n_train = num_cameras - 1
    cameras = [ring_camera(i, n_train, body_center, size=image_size) for i in range(n_train)]
    # Holdout sits between two training azimuths at a different height.
    holdout_camera = ring_camera(
        0, n_train, body_center, size=image_size, height=1.5, phase=np.pi / n_train
    )

    # Like an SfM cloud, the ground-truth background only contains points the
    # training cameras actually observe; unobserved points would stay at
    # their init values and tell us nothing about fit quality.
    factor = 1.6
    for _ in range(6):
        truth_bg = make_background_shell(rng, n=int(n_background * factor))
        keep = observed_mask(truth_bg, cameras)
        idx = np.flatnonzero(keep)[:n_background]
        if len(idx) == n_background:
            break
        factor *= 2.0
    else:
        raise RuntimeError("background shell too sparse for the camera ring")
    truth_bg = BackgroundGaussians(
        positions=truth_bg.positions[idx],
        rotations=truth_bg.rotations[idx],
        log_scales=truth_bg.log_scales[idx],
        opacity_logits=truth_bg.opacity_logits[idx],
        color_logits=truth_bg.color_logits[idx],
    )

    pose = make_test_pose(mesh, seed=seed + 1, magnitude=0.25)
    truth = FitScene(
        background=truth_bg,
        human=truth_human,
        mesh=mesh,
        alignment=SceneAlignment.identity(),
        texture=texture,
    )

    frames = []
    for camera in cameras + [holdout_camera]:
        posed = pose_human(truth_human, mesh, pose, truth.alignment, texture)
        scene = merge(truth_bg, posed)
        image = render(scene, camera)
        _, mask = render_human_only(scene, camera)
        frames.append(Frame(image=image, camera=camera, mask=mask, pose=pose))

    # Positions, scales, and opacities start at truth (the SfM-like given);
    # colors start dark-gray and must be recovered. A translucent-opacity
    # start would let 500 blending layers overfit the 8 train rays
    # view-dependently instead of recovering transferable colors.
    initial_bg = truth_bg.copy()
    initial_bg.color_logits[:] = logit(np.asarray(0.15))
    initial_human = HumanGaussians.from_texture(texture, base_opacity_logit=3.0)
    initial = FitScene(
        background=initial_bg,
        human=initial_human,
        mesh=mesh,
        alignment=SceneAlignment.identity(),
        texture=texture,
    )

    return SyntheticSetup(
        truth=truth,
        initial=initial,
        frames=frames[:-1],
        holdout=frames[-1],
        pose=pose,
    )


def render_scene_frame(scene: FitScene, camera: Camera, pose: Pose):
    posed = pose_human(scene.human, scene.mesh, pose, scene.alignment, scene.texture)
    return render(merge(scene.background, posed), camera)


def write_scene_bundle(scene: FitScene, directory) -> dict:
    """Persist a FitScene as the on-disk bundle the CLI and service load."""
    from pathlib import Path

    from skinsplat.body import mesh_to_dict
    from skinsplat.scene import save_background_ply, save_human
    from skinsplat.texture import save_texture
    import json

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "mesh": directory / "mesh.json",
        "texture": directory / "body.ptex",
        "human": directory / "human.bin",
        "background": directory / "background.ply",
        "alignment": directory / "alignment.json",
    }
    paths["mesh"].write_text(json.dumps(mesh_to_dict(scene.mesh)))
    save_texture(scene.texture, paths["texture"])
    save_human(scene.human, paths["human"])
    save_background_ply(scene.background, paths["background"])
    scene.alignment.save(paths["alignment"])
    return {k: str(v) for k, v in paths.items()}


def save_frames(frames, directory) -> None:
    for i, frame in enumerate(frames):
        save_frame(directory, i, frame)
