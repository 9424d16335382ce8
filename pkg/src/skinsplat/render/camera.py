"""Pinhole camera and float image containers used by the rasterizer."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Camera:
    """World-to-camera pinhole camera.

    ``rotation`` and ``translation`` map world points into camera space
    (x right, y down, z forward); pixel centers sit at half-integer
    coordinates, so a point on the optical axis projects to (cx, cy).
    """

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int
    near: float = 0.01

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be (3, 3) and translation (3,)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "width": self.width,
            "height": self.height,
            "near": self.near,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Camera":
        return cls(
            fx=doc["fx"],
            fy=doc["fy"],
            cx=doc["cx"],
            cy=doc["cy"],
            rotation=np.asarray(doc["rotation"], dtype=np.float64),
            translation=np.asarray(doc["translation"], dtype=np.float64),
            width=int(doc["width"]),
            height=int(doc["height"]),
            near=doc.get("near", 0.01),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "Camera":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def looking_at(
        cls,
        eye: np.ndarray,
        target: np.ndarray,
        up: np.ndarray = (0.0, 1.0, 0.0),
        fov_deg: float = 50.0,
        width: int = 256,
        height: int = 256,
        near: float = 0.01,
    ) -> "Camera":
        """Convenience constructor: camera at ``eye`` looking at ``target``."""
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        norm = np.linalg.norm(forward)
        if norm < 1e-12:
            raise ValueError("eye and target coincide")
        forward = forward / norm
        upv = np.asarray(up, dtype=np.float64)
        right = np.cross(forward, upv)
        rnorm = np.linalg.norm(right)
        if rnorm < 1e-12:
            raise ValueError("up vector is parallel to the view direction")
        right /= rnorm
        down = np.cross(forward, right)
        R = np.stack([right, down, forward])  # world-to-camera rows
        t = -R @ eye
        f = 0.5 * width / np.tan(0.5 * np.deg2rad(fov_deg))
        return cls(
            fx=f, fy=f, cx=width / 2.0, cy=height / 2.0,
            rotation=R, translation=t, width=width, height=height, near=near,
        )


@dataclass(frozen=True)
class RenderStats:
    """Bookkeeping from a render pass."""

    num_culled: int = 0
    num_skipped: int = 0  # non-invertible cov2d after regularization
    num_drawn: int = 0


@dataclass(frozen=True)
class Image:
    """Float RGB image in [0, 1] with an accumulated-alpha channel."""

    rgb: np.ndarray
    alpha: np.ndarray | None = None
    stats: RenderStats | None = field(default=None, compare=False)

    def __post_init__(self):
        rgb = np.asarray(self.rgb, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError(f"rgb must be (H, W, 3), got {rgb.shape}")
        if not np.all(np.isfinite(rgb)):
            raise ValueError("rgb contains non-finite values")
        object.__setattr__(self, "rgb", rgb)
        if self.alpha is not None:
            alpha = np.asarray(self.alpha, dtype=np.float64)
            if alpha.shape != rgb.shape[:2]:
                raise ValueError("alpha shape must match rgb")
            if not np.all(np.isfinite(alpha)):
                raise ValueError("alpha contains non-finite values")
            object.__setattr__(self, "alpha", alpha)

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    def to_uint8(self) -> np.ndarray:
        return (np.clip(self.rgb, 0.0, 1.0) * 255.0).round().astype(np.uint8)

    def save_png(self, path: str | Path) -> None:
        from PIL import Image as PILImage

        PILImage.fromarray(self.to_uint8()).save(path, format="PNG")

    def png_bytes(self) -> bytes:
        import io

        from PIL import Image as PILImage

        buf = io.BytesIO()
        PILImage.fromarray(self.to_uint8()).save(buf, format="PNG")
        return buf.getvalue()

    def save_pfm(self, path: str | Path) -> None:
        """Float PFM (little-endian, bottom-up per the format convention)."""
        with open(path, "wb") as f:
            f.write(b"PF\n")
            f.write(f"{self.width} {self.height}\n".encode())
            f.write(b"-1.0\n")
            f.write(self.rgb[::-1].astype("<f4").tobytes())

    @classmethod
    def load_png(cls, path: str | Path) -> "Image":
        from PIL import Image as PILImage

        arr = np.asarray(PILImage.open(path).convert("RGB"), dtype=np.float64) / 255.0
        return cls(rgb=arr)


def load_pfm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"PF":
            raise ValueError(f"{path}: not a color PFM file")
        w, h = map(int, f.readline().split())
        scale = float(f.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(w * h * 3 * 4), dtype=dtype).reshape(h, w, 3)
        return data[::-1].astype(np.float64)
