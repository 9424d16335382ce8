"""Frame-directory layout for the fit CLI.

Each frame i contributes three files:
    frame_XXX.png       target image
    frame_XXX.mask.png  binary human mask (any nonzero pixel counts)
    frame_XXX.json      {"camera": {...}, "pose": {"joint_rotations": ...}}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .body import Pose, SkinnedMesh
from .fit import Frame
from .render import Camera, Image


def save_frame(directory: str | Path, index: int, frame: Frame) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = f"frame_{index:03d}"
    frame.image.save_png(directory / f"{stem}.png")
    PILImage.fromarray((frame.mask * 255).astype(np.uint8)).save(
        directory / f"{stem}.mask.png"
    )
    doc = {
        "camera": frame.camera.to_dict(),
        "pose": {
            "joint_rotations": frame.pose.joint_rotations.tolist(),
            "root_translation": frame.pose.root_translation.tolist(),
        },
    }
    (directory / f"{stem}.json").write_text(json.dumps(doc, indent=2))


def load_frames_dir(directory: str | Path, mesh: SkinnedMesh) -> list[Frame]:
    directory = Path(directory)
    frames = []
    for meta_path in sorted(directory.glob("frame_*.json")):
        stem = meta_path.stem
        doc = json.loads(meta_path.read_text())
        camera = Camera.from_dict(doc["camera"])
        pose_doc = doc["pose"]
        pose = Pose(
            np.asarray(pose_doc["joint_rotations"], dtype=np.float64),
            np.asarray(pose_doc.get("root_translation", [0.0, 0.0, 0.0]), dtype=np.float64),
        )
        if pose.num_joints != mesh.num_joints:
            raise ValueError(f"{meta_path}: pose has {pose.num_joints} joints, mesh {mesh.num_joints}")
        image = Image.load_png(directory / f"{stem}.png")
        mask = (
            np.asarray(PILImage.open(directory / f"{stem}.mask.png").convert("L")) > 0
        )
        frames.append(Frame(image=image, camera=camera, mask=mask, pose=pose))
    if not frames:
        raise ValueError(f"no frame_*.json files in {directory}")
    return frames
