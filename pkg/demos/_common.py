"""Shared helpers for the demo scripts: a small synthetic room scene around
the bundled toy body."""

from pathlib import Path

import numpy as np

from skinsplat import (
    BackgroundGaussians,
    Camera,
    HumanGaussians,
    bake,
)
from skinsplat.samples import make_test_body

OUT_ROOT = Path(__file__).resolve().parent / "out"


def out_dir(name: str) -> Path:
    path = OUT_ROOT / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def make_room_background(seed: int = 0, n: int = 400) -> BackgroundGaussians:
    """Colored cylinder wall + ground annulus around the body."""
    rng = np.random.default_rng(seed)
    n_wall = int(n * 0.7)
    angles = rng.uniform(0, 2 * np.pi, n_wall)
    heights = rng.uniform(-0.2, 2.6, n_wall)
    wall = np.stack([4.2 * np.sin(angles), heights, 4.2 * np.cos(angles)], axis=1)
    n_disk = n - n_wall
    disk_r = np.sqrt(rng.uniform(0, 1, n_disk)) * 1.1 + 0.9
    disk_a = rng.uniform(0, 2 * np.pi, n_disk)
    disk = np.stack([disk_r * np.sin(disk_a), np.zeros(n_disk), disk_r * np.cos(disk_a)], axis=1)
    scales = np.concatenate([rng.uniform(0.20, 0.32, n_wall), rng.uniform(0.06, 0.11, n_disk)])
    return BackgroundGaussians.from_activated(
        positions=np.vstack([wall, disk]),
        colors=rng.uniform(0.15, 0.85, (n, 3)),
        opacities=np.full(n, 0.98),
        scales=np.tile(scales[:, None], (1, 3)),
    )


def make_textured_human(resolution: int = 64, seed: int = 0):
    """Toy body baked to a position texture with a random color pattern."""
    mesh = make_test_body()
    texture = bake(mesh, resolution)
    human = HumanGaussians.from_texture(texture, base_opacity_logit=3.0)
    rng = np.random.default_rng(seed)
    human.color_grid[:] = np.clip(rng.normal(0.0, 0.5, human.color_grid.shape), -1.5, 1.5)
    return mesh, texture, human


def orbit_camera(angle: float, size: int = 160, radius: float = 3.0, height: float = 1.35) -> Camera:
    eye = np.array([radius * np.sin(angle), height, radius * np.cos(angle)])
    return Camera.looking_at(eye=eye, target=(0.0, 1.0, 0.0), fov_deg=55.0, width=size, height=size)
