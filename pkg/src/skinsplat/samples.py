"""Bundled procedural test assets: a toy humanoid body with UVs, sparse
skinning weights, and a 15-joint skeleton.

The body is a set of square-section tubes (torso, head, limb segments),
each unwrapped to its own rectangular UV island. It is deliberately small
and fully deterministic: tests, demos, and benchmarks all derive their
fixtures from it.
"""

from __future__ import annotations

import numpy as np

from .body import DaPoseConfig, Pose, SkinnedMesh

# (name, parent, rest position)
_JOINTS: list[tuple[str, str | None, tuple[float, float, float]]] = [
    ("pelvis", None, (0.0, 1.00, 0.0)),
    ("spine", "pelvis", (0.0, 1.25, 0.0)),
    ("chest", "spine", (0.0, 1.45, 0.0)),
    ("head", "chest", (0.0, 1.62, 0.0)),
    ("shoulder_l", "chest", (0.18, 1.45, 0.0)),
    ("elbow_l", "shoulder_l", (0.45, 1.45, 0.0)),
    ("wrist_l", "elbow_l", (0.70, 1.45, 0.0)),
    ("shoulder_r", "chest", (-0.18, 1.45, 0.0)),
    ("elbow_r", "shoulder_r", (-0.45, 1.45, 0.0)),
    ("wrist_r", "elbow_r", (-0.70, 1.45, 0.0)),
    ("hip_l", "pelvis", (0.10, 0.96, 0.0)),
    ("knee_l", "hip_l", (0.10, 0.55, 0.0)),
    ("ankle_l", "knee_l", (0.10, 0.12, 0.0)),
    ("hip_r", "pelvis", (-0.10, 0.96, 0.0)),
    ("knee_r", "hip_r", (-0.10, 0.55, 0.0)),
    ("ankle_r", "knee_r", (-0.10, 0.12, 0.0)),
]

# Tube parts: (endpoints, half widths, skin controls [(joint, s), ...]).
# Skin controls interpolate linearly along the tube parameter s in [0, 1].
_PARTS = [
    ("torso", "pelvis", "chest", (0.16, 0.10), [("pelvis", 0.0), ("spine", 0.5), ("chest", 1.0)]),
    ("head", "head", None, (0.09, 0.09), [("head", 0.0), ("head", 1.0)]),
    ("upper_arm_l", "shoulder_l", "elbow_l", (0.05, 0.05), [("shoulder_l", 0.0), ("elbow_l", 1.0)]),
    ("forearm_l", "elbow_l", "wrist_l", (0.04, 0.04), [("elbow_l", 0.0), ("wrist_l", 1.0)]),
    ("upper_arm_r", "shoulder_r", "elbow_r", (0.05, 0.05), [("shoulder_r", 0.0), ("elbow_r", 1.0)]),
    ("forearm_r", "elbow_r", "wrist_r", (0.04, 0.04), [("elbow_r", 0.0), ("wrist_r", 1.0)]),
    ("thigh_l", "hip_l", "knee_l", (0.07, 0.07), [("hip_l", 0.0), ("knee_l", 1.0)]),
    ("shin_l", "knee_l", "ankle_l", (0.055, 0.055), [("knee_l", 0.0), ("ankle_l", 1.0)]),
    ("thigh_r", "hip_r", "knee_r", (0.07, 0.07), [("hip_r", 0.0), ("knee_r", 1.0)]),
    ("shin_r", "knee_r", "ankle_r", (0.055, 0.055), [("knee_r", 0.0), ("ankle_r", 1.0)]),
]

_HEAD_LENGTH = 0.22
_RINGS = 9
_ATLAS_COLS = 4
_ATLAS_ROWS = 3
_ISLAND_MARGIN = 0.015


def body_da_pose_config() -> DaPoseConfig:
    return DaPoseConfig(left_hip="hip_l", right_hip="hip_r")


def make_test_body() -> SkinnedMesh:
    """The bundled toy humanoid: ~360 vertices, ~640 triangles, 16 joints."""
    names = [j[0] for j in _JOINTS]
    name_to_idx = {n: i for i, n in enumerate(names)}
    parents = np.array(
        [-1 if j[1] is None else name_to_idx[j[1]] for j in _JOINTS], dtype=np.int64
    )
    jpos = np.array([j[2] for j in _JOINTS])

    vertices: list[np.ndarray] = []
    triangles: list[list[int]] = []
    uvs: list[np.ndarray] = []
    weight_rows: list[list[tuple[int, float]]] = []

    for part_idx, (part, a, b, half, controls) in enumerate(_PARTS):
        p0 = jpos[name_to_idx[a]]
        if b is None:  # head: extrude upward from its joint
            p1 = p0 + np.array([0.0, _HEAD_LENGTH, 0.0])
        else:
            p1 = jpos[name_to_idx[b]]
        island = _island_rect(part_idx)
        _build_tube(
            p0,
            p1,
            half,
            [(name_to_idx[j], s) for j, s in controls],
            island,
            vertices,
            triangles,
            uvs,
            weight_rows,
        )

    max_k = max(len(r) for r in weight_rows)
    wj = np.zeros((len(vertices), max_k), dtype=np.int64)
    wv = np.zeros((len(vertices), max_k))
    for i, row in enumerate(weight_rows):
        for k, (j, w) in enumerate(row):
            wj[i, k] = j
            wv[i, k] = w

    return SkinnedMesh(
        vertices=np.asarray(vertices),
        triangles=np.asarray(triangles, dtype=np.int64),
        uvs=np.asarray(uvs),
        weight_joints=wj,
        weight_values=wv,
        joint_names=names,
        joint_parents=parents,
        joint_positions=jpos,
    )


def _island_rect(part_idx: int) -> tuple[float, float, float, float]:
    col = part_idx % _ATLAS_COLS
    row = part_idx // _ATLAS_COLS
    cw = 1.0 / _ATLAS_COLS
    ch = 1.0 / _ATLAS_ROWS
    u0 = col * cw + _ISLAND_MARGIN
    v0 = row * ch + _ISLAND_MARGIN
    return (u0, v0, cw - 2 * _ISLAND_MARGIN, ch - 2 * _ISLAND_MARGIN)


def _build_tube(p0, p1, half, controls, island, vertices, triangles, uvs, weight_rows):
    axis = p1 - p0
    length = np.linalg.norm(axis)
    u = axis / length
    # Stable orthonormal frame around the tube axis.
    ref = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    e1 = np.cross(u, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)

    corners = [
        half[0] * e1 + half[1] * e2,
        -half[0] * e1 + half[1] * e2,
        -half[0] * e1 - half[1] * e2,
        half[0] * e1 - half[1] * e2,
    ]

    base = len(vertices)
    for r in range(_RINGS):
        s = r / (_RINGS - 1)
        center = p0 + s * axis
        for c in corners:
            vertices.append(center + c)
        weight_rows.append(_skin_weights(controls, s))
        weight_rows.append(_skin_weights(controls, s))
        weight_rows.append(_skin_weights(controls, s))
        weight_rows.append(_skin_weights(controls, s))

    u0, v0, w, h = island
    for r in range(_RINGS - 1):
        s_lo = r / (_RINGS - 1)
        s_hi = (r + 1) / (_RINGS - 1)
        for k in range(4):
            k2 = (k + 1) % 4
            i00 = base + r * 4 + k
            i01 = base + r * 4 + k2
            i10 = base + (r + 1) * 4 + k
            i11 = base + (r + 1) * 4 + k2
            # Per-corner UVs: the wrap column k=3 maps its second corner to
            # the island's right edge, so no duplicated seam vertices needed.
            uv00 = (u0 + w * (k / 4), v0 + h * s_lo)
            uv01 = (u0 + w * ((k + 1) / 4), v0 + h * s_lo)
            uv10 = (u0 + w * (k / 4), v0 + h * s_hi)
            uv11 = (u0 + w * ((k + 1) / 4), v0 + h * s_hi)
            triangles.append([i00, i01, i11])
            uvs.append(np.array([uv00, uv01, uv11]))
            triangles.append([i00, i11, i10])
            uvs.append(np.array([uv00, uv11, uv10]))


def _skin_weights(controls: list[tuple[int, float]], s: float) -> list[tuple[int, float]]:
    """Linear interpolation between the two bracketing skin controls."""
    if s <= controls[0][1]:
        return [(controls[0][0], 1.0)]
    for (j0, s0), (j1, s1) in zip(controls, controls[1:]):
        if s <= s1:
            if j0 == j1:
                return [(j0, 1.0)]
            t = (s - s0) / (s1 - s0)
            if t <= 0.0:
                return [(j0, 1.0)]
            if t >= 1.0:
                return [(j1, 1.0)]
            return [(j0, 1.0 - t), (j1, t)]
    return [(controls[-1][0], 1.0)]


def make_test_pose(mesh: SkinnedMesh, seed: int = 0, magnitude: float = 0.4) -> Pose:
    """A deterministic random pose with bounded joint angles (radians)."""
    rng = np.random.default_rng(seed)
    rotations = rng.uniform(-magnitude, magnitude, size=(mesh.num_joints, 3))
    return Pose(rotations, rng.uniform(-0.1, 0.1, size=3))
