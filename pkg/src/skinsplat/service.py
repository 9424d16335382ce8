"""HTTP render service for real-time pose editing and motion playback.

State mutations (pose, camera) are serialized behind a lock and swap in a
new immutable snapshot; renders read whichever snapshot was current when
they started, so concurrent GET /frame requests never see a half-applied
update. JSON schemas are documented in docs/http_api.md.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .alignment import SceneAlignment
from .body import Pose, SkinnedMesh, load_mesh_json
from .render import Camera, Image, RasterConfig, DEFAULT_CONFIG
from .render.rasterizer import render
from .scene import (
    BackgroundGaussians,
    HumanGaussians,
    load_background_ply,
    load_human,
    merge,
    pose_human,
)
from .texture import PositionTexture, load_texture

API_VERSION = 1


@dataclass(frozen=True)
class MotionClip:
    """Ordered (timestamp, pose) keys with strictly increasing timestamps."""

    timestamps: np.ndarray
    poses: list[Pose]

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.float64)
        if ts.ndim != 1 or len(ts) != len(self.poses):
            raise ValueError("timestamps and poses must have equal length")
        if len(ts) == 0:
            raise ValueError("clip needs at least one key")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)

    @classmethod
    def from_dict(cls, doc: dict, num_joints: int) -> "MotionClip":
        keys = doc["keys"]
        timestamps = [k["t"] for k in keys]
        poses = []
        for k in keys:
            rot = np.asarray(k["joint_rotations"], dtype=np.float64)
            if rot.shape != (num_joints, 3):
                raise ValueError(
                    f"clip pose has {rot.shape} rotations, expected ({num_joints}, 3)"
                )
            poses.append(Pose(rot, np.asarray(k.get("root_translation", [0, 0, 0]))))
        return cls(np.asarray(timestamps), poses)

    def sample(self, t: float) -> Pose:
        """Linear axis-angle interpolation between the bracketing keys."""
        ts = self.timestamps
        if t <= ts[0]:
            return self.poses[0]
        if t >= ts[-1]:
            return self.poses[-1]
        i = int(np.searchsorted(ts, t, side="right") - 1)
        f = (t - ts[i]) / (ts[i + 1] - ts[i])
        a, b = self.poses[i], self.poses[i + 1]
        return Pose(
            a.joint_rotations * (1 - f) + b.joint_rotations * f,
            a.root_translation * (1 - f) + b.root_translation * f,
        )


@dataclass(frozen=True)
class SessionState:
    """Immutable scene + pose + camera snapshot; one active session per server."""

    background: BackgroundGaussians
    human: HumanGaussians
    mesh: SkinnedMesh
    texture: PositionTexture | None
    alignment: SceneAlignment
    pose: Pose
    camera: Camera
    raster: RasterConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.pose.num_joints != self.mesh.num_joints:
            raise ValueError("pose joint count does not match mesh")

    def with_pose(self, pose: Pose) -> "SessionState":
        return replace(self, pose=pose)

    def with_camera(self, camera: Camera) -> "SessionState":
        return replace(self, camera=camera)

    def render_frame(self) -> Image:
        posed = pose_human(self.human, self.mesh, self.pose, self.alignment, self.texture)
        return render(merge(self.background, posed), self.camera, self.raster)


def load_session(
    background_ply: str | Path,
    human_bin: str | Path,
    texture_file: str | Path,
    mesh_json: str | Path,
    alignment_json: str | Path | None = None,
    camera_json: str | Path | None = None,
    width: int = 256,
    height: int = 256,
) -> SessionState:
    """Assemble a session from a scene bundle; raises on malformed inputs."""
    mesh = load_mesh_json(mesh_json)
    texture = load_texture(texture_file)
    human = load_human(human_bin, texture)
    background = load_background_ply(background_ply)
    alignment = (
        SceneAlignment.load(alignment_json) if alignment_json else SceneAlignment.identity()
    )
    if camera_json:
        camera = Camera.load(camera_json)
    else:
        center = human.rest_positions.mean(axis=0)
        camera = Camera.looking_at(
            eye=center + np.array([0.0, 0.2, -2.4]),
            target=center,
            width=width,
            height=height,
        )
    return SessionState(
        background=background,
        human=human,
        mesh=mesh,
        texture=texture,
        alignment=alignment,
        pose=Pose.identity(mesh.num_joints),
        camera=camera,
    )


def set_pose(state: SessionState, updates: dict[str, list[float]],
             root_translation: list[float] | None = None) -> SessionState:
    """Merge partial joint updates into the current pose.

    Unknown joint names reject the whole update (no partial apply).
    """
    unknown = [name for name in updates if name not in state.mesh.joint_names]
    if unknown:
        raise ValueError(f"unknown joints: {', '.join(sorted(unknown))}")
    rotations = state.pose.joint_rotations.copy()
    for name, value in updates.items():
        vec = np.asarray(value, dtype=np.float64)
        if vec.shape != (3,):
            raise ValueError(f"joint {name!r}: expected a 3-vector, got {value!r}")
        rotations[state.mesh.joint_index(name)] = vec
    translation = (
        state.pose.root_translation
        if root_translation is None
        else np.asarray(root_translation, dtype=np.float64)
    )
    return state.with_pose(Pose(rotations, translation))


def play_clip(
    state: SessionState,
    clip: MotionClip,
    out_dir: str | Path,
    fps: float | None = None,
    camera_track: list[Camera] | None = None,
) -> list[Path]:
    """Render a clip to PNG frames: one per key, or resampled at ``fps``.

    A camera track (same length as the rendered frame list) changes the view
    during the motion.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fps is None:
        times = list(clip.timestamps)
    else:
        if fps <= 0:
            raise ValueError("fps must be positive")
        duration = clip.timestamps[-1] - clip.timestamps[0]
        n = max(1, int(round(duration * fps)) + 1)
        times = [clip.timestamps[0] + i / fps for i in range(n)]
    if camera_track is not None and len(camera_track) != len(times):
        raise ValueError(
            f"camera track has {len(camera_track)} entries for {len(times)} frames"
        )
    paths = []
    for i, t in enumerate(times):
        frame_state = state.with_pose(clip.sample(t))
        if camera_track is not None:
            frame_state = frame_state.with_camera(camera_track[i])
        image = frame_state.render_frame()
        path = out_dir / f"frame_{i:05d}.png"
        image.save_png(path)
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# HTTP server
# ---------------------------------------------------------------------------


class RenderService:
    """Single-session render service with snapshot semantics."""

    def __init__(self, state: SessionState, ui_dir: str | Path | None = None):
        self._state = state
        self._lock = threading.Lock()
        self.ui_dir = Path(ui_dir) if ui_dir else None

    @property
    def state(self) -> SessionState:
        with self._lock:
            return self._state

    def mutate(self, fn) -> SessionState:
        with self._lock:
            self._state = fn(self._state)
            return self._state

    # -- handlers ----------------------------------------------------------

    def meta(self) -> dict:
        state = self.state
        return {
            "api_version": API_VERSION,
            "joints": list(state.mesh.joint_names),
            "resolution": state.texture.width if state.texture else None,
            "texel_count": len(state.human),
            "image": {"width": state.camera.width, "height": state.camera.height},
        }

    def get_pose(self) -> dict:
        state = self.state
        return {
            "joint_rotations": {
                name: state.pose.joint_rotations[i].tolist()
                for i, name in enumerate(state.mesh.joint_names)
            },
            "root_translation": state.pose.root_translation.tolist(),
        }

    def put_pose(self, body: dict) -> dict:
        updates = body.get("joints", {})
        root = body.get("root_translation")
        self.mutate(lambda s: set_pose(s, updates, root))
        return self.get_pose()

    def put_camera(self, body: dict) -> dict:
        try:
            camera = Camera.from_dict(body)
        except KeyError as missing:
            raise ValueError(f"camera document missing field {missing}") from None
        self.mutate(lambda s: s.with_camera(camera))
        return {"ok": True}

    def frame_png(self) -> tuple[bytes, float]:
        state = self.state
        start = time.perf_counter()
        image = state.render_frame()
        data = image.png_bytes()
        return data, (time.perf_counter() - start) * 1e3

    def clip(self, body: dict) -> dict:
        state = self.state
        clip = MotionClip.from_dict(body, state.mesh.num_joints)
        out_dir = body.get("out_dir")
        if not out_dir:
            raise ValueError("clip request needs out_dir")
        fps = body.get("fps")
        paths = play_clip(state, clip, out_dir, fps=fps)
        return {"frames": [str(p) for p in paths]}


class _Handler(BaseHTTPRequestHandler):
    service: RenderService  # set by serve()

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, payload: dict, status: int = 200):
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length == 0:
            return {}
        return json.loads(self.rfile.read(length))

    def _serve_ui(self, path: str):
        ui_dir = self.service.ui_dir
        if ui_dir is None:
            self._send_json({"error": "no UI bundle configured"}, 404)
            return
        if path == "/ui":  # relative asset URLs need the trailing slash
            self.send_response(301)
            self.send_header("Location", "/ui/")
            self.end_headers()
            return
        rel = path[len("/ui"):].lstrip("/") or "index.html"
        target = (ui_dir / rel).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            self._send_json({"error": "not found"}, 404)
            return
        types = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
                 ".map": "application/json"}
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", types.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        try:
            if self.path == "/meta":
                self._send_json(self.service.meta())
            elif self.path == "/pose":
                self._send_json(self.service.get_pose())
            elif self.path == "/frame":
                data, millis = self.service.frame_png()
                self.send_response(200)
                self.send_header("Content-Type", "image/png")
                self.send_header("Content-Length", str(len(data)))
                self.send_header("X-Render-Millis", f"{millis:.3f}")
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Expose-Headers", "X-Render-Millis")
                self.end_headers()
                self.wfile.write(data)
            elif self.path == "/ui" or self.path.startswith("/ui/"):
                self._serve_ui(self.path)
            else:
                self._send_json({"error": f"unknown path {self.path}"}, 404)
        except Exception as exc:  # surface errors as JSON, keep serving
            self._send_json({"error": str(exc)}, 500)

    def do_PUT(self):
        try:
            body = self._read_json()
            if self.path == "/pose":
                self._send_json(self.service.put_pose(body))
            elif self.path == "/camera":
                self._send_json(self.service.put_camera(body))
            else:
                self._send_json({"error": f"unknown path {self.path}"}, 404)
        except ValueError as exc:
            self._send_json({"error": str(exc)}, 400)
        except Exception as exc:
            self._send_json({"error": str(exc)}, 500)

    def do_POST(self):
        try:
            body = self._read_json()
            if self.path == "/clip":
                self._send_json(self.service.clip(body))
            else:
                self._send_json({"error": f"unknown path {self.path}"}, 404)
        except ValueError as exc:
            self._send_json({"error": str(exc)}, 400)
        except Exception as exc:
            self._send_json({"error": str(exc)}, 500)


def serve(
    state: SessionState,
    host: str = "127.0.0.1",
    port: int = 8090,
    ui_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Start the render service; returns the server (call serve_forever())."""
    service = RenderService(state, ui_dir=ui_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    server.service = service  # type: ignore[attr-defined]
    return server
