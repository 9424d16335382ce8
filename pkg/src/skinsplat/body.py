"""Generic skinned body model: joint hierarchy, forward kinematics, and
Linear Blend Skinning.

The model is data-driven: any mesh with UV-mapped triangles, sparse skinning
weights, and a single-rooted joint tree works (humanoid, quadruped, or a toy
test rig). Joint transforms returned by :func:`forward_kinematics` map
rest-pose points directly to posed points, i.e. they already include the
inverse rest transform of each joint.

All types are immutable after construction; operations are pure functions.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rotations import axis_angle_to_matrix, make_rigid, rigid_inverse

# Sparse skinning storage width: enough for common assets, keeps LBS gathers cheap.
MAX_WEIGHTS_PER_VERTEX = 8

_WEIGHT_SUM_TOL = 1e-6
_LBS_ROW_TOL = 1e-4


@dataclass(frozen=True)
class SkinnedMesh:
    """Rest-pose triangle mesh with UVs, sparse skinning weights, and a skeleton.

    Attributes:
        vertices: (V, 3) rest-pose positions, meters.
        triangles: (T, 3) int vertex indices.
        uvs: (T, 3, 2) per-corner UV coordinates in [0, 1]^2.
        weight_joints: (V, K) int joint indices, padded with 0.
        weight_values: (V, K) floats, padded with 0; each row sums to 1.
        joint_names: length-m list.
        joint_parents: (m,) int, -1 for the single root.
        joint_positions: (m, 3) rest-pose joint locations.
        shape_dirs: optional (V, 3, B) displacement basis, one column per
            shape coefficient.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    uvs: np.ndarray
    weight_joints: np.ndarray
    weight_values: np.ndarray
    joint_names: list[str]
    joint_parents: np.ndarray
    joint_positions: np.ndarray
    shape_dirs: np.ndarray | None = None
    # Topological order over joints (parents first), derived in __post_init__.
    joint_order: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        tri = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        uvs = np.ascontiguousarray(np.asarray(self.uvs, dtype=np.float64))
        wj = np.ascontiguousarray(np.asarray(self.weight_joints, dtype=np.int64))
        wv = np.ascontiguousarray(np.asarray(self.weight_values, dtype=np.float64))
        parents = np.asarray(self.joint_parents, dtype=np.int64)
        jpos = np.asarray(self.joint_positions, dtype=np.float64)

        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (V, 3), got {v.shape}")
        if tri.ndim != 2 or tri.shape[1] != 3:
            raise ValueError(f"triangles must be (T, 3), got {tri.shape}")
        if uvs.shape != (tri.shape[0], 3, 2):
            raise ValueError(f"uvs must be (T, 3, 2), got {uvs.shape}")
        if tri.size and (tri.min() < 0 or tri.max() >= len(v)):
            raise ValueError("triangle indices out of range")
        if uvs.size and (uvs.min() < 0.0 or uvs.max() > 1.0):
            raise ValueError("UV coordinates must lie in [0, 1]^2")
        if wj.shape != wv.shape or wj.ndim != 2 or wj.shape[0] != len(v):
            raise ValueError("weight arrays must be (V, K) and congruent")
        if wv.min() < 0.0:
            raise ValueError("skinning weights must be nonnegative")
        m = len(self.joint_names)
        if parents.shape != (m,) or jpos.shape != (m, 3):
            raise ValueError("joint arrays inconsistent with joint_names")
        if wj.size and (wj.min() < 0 or wj.max() >= m):
            raise ValueError("weight joint indices out of range")

        # Renormalize rows on load, then enforce the 1e-6 invariant.
        sums = wv.sum(axis=1)
        if np.any(sums <= 0):
            raise ValueError("every vertex needs positive total skinning weight")
        wv = wv / sums[:, None]
        if np.any(np.abs(wv.sum(axis=1) - 1.0) > _WEIGHT_SUM_TOL):
            raise ValueError("skinning weight rows do not sum to 1")

        roots = np.flatnonzero(parents < 0)
        if len(roots) != 1:
            raise ValueError(f"joint hierarchy must have exactly one root, got {len(roots)}")
        order = _topological_order(parents)

        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", tri)
        object.__setattr__(self, "uvs", uvs)
        object.__setattr__(self, "weight_joints", wj)
        object.__setattr__(self, "weight_values", wv)
        object.__setattr__(self, "joint_parents", parents)
        object.__setattr__(self, "joint_positions", jpos)
        object.__setattr__(self, "joint_order", order)
        if self.shape_dirs is not None:
            sd = np.asarray(self.shape_dirs, dtype=np.float64)
            if sd.ndim != 3 or sd.shape[:2] != (len(v), 3):
                raise ValueError(f"shape_dirs must be (V, 3, B), got {sd.shape}")
            object.__setattr__(self, "shape_dirs", sd)

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def joint_index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise ValueError(f"unknown joint {name!r}") from None

    def shaped_vertices(self, shape_coeffs: np.ndarray | None) -> np.ndarray:
        """Rest vertices displaced by the shape basis (identity if absent)."""
        if shape_coeffs is None or len(np.atleast_1d(shape_coeffs)) == 0:
            return self.vertices
        if self.shape_dirs is None:
            warnings.warn("mesh has no shape_dirs; shape coefficients ignored")
            return self.vertices
        beta = np.asarray(shape_coeffs, dtype=np.float64)
        if beta.shape != (self.shape_dirs.shape[2],):
            raise ValueError(
                f"expected {self.shape_dirs.shape[2]} shape coefficients, got {beta.shape}"
            )
        return self.vertices + self.shape_dirs @ beta


def _topological_order(parents: np.ndarray) -> np.ndarray:
    """Parents-first ordering; raises if the parent graph has a cycle."""
    m = len(parents)
    order: list[int] = []
    state = np.zeros(m, dtype=np.int8)  # 0 new, 1 visiting, 2 done

    def visit(j: int):
        chain = []
        while j >= 0 and state[j] == 0:
            state[j] = 1
            chain.append(j)
            j = parents[j]
        if j >= 0 and state[j] == 1:
            raise ValueError("joint parent indices contain a cycle")
        for k in reversed(chain):
            state[k] = 2
            order.append(k)

    for j in range(m):
        visit(j)
    return np.asarray(order, dtype=np.int64)


@dataclass(frozen=True)
class Pose:
    """Axis-angle joint rotations plus a root translation.

    ``joint_rotations`` is (m, 3) radians; ``root_translation`` is (3,) meters.
    """

    joint_rotations: np.ndarray
    root_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    shape_coeffs: np.ndarray | None = None

    def __post_init__(self):
        rot = np.asarray(self.joint_rotations, dtype=np.float64)
        t = np.asarray(self.root_translation, dtype=np.float64)
        if rot.ndim != 2 or rot.shape[1] != 3:
            raise ValueError(f"joint_rotations must be (m, 3), got {rot.shape}")
        if t.shape != (3,):
            raise ValueError(f"root_translation must be (3,), got {t.shape}")
        object.__setattr__(self, "joint_rotations", rot)
        object.__setattr__(self, "root_translation", t)
        if self.shape_coeffs is not None:
            object.__setattr__(
                self, "shape_coeffs", np.asarray(self.shape_coeffs, dtype=np.float64)
            )

    @classmethod
    def identity(cls, num_joints: int) -> "Pose":
        return cls(np.zeros((num_joints, 3)))

    @property
    def num_joints(self) -> int:
        return len(self.joint_rotations)


@dataclass(frozen=True)
class JointTransforms:
    """Per-joint rigid 4x4 transforms, ready to apply to rest-pose points."""

    matrices: np.ndarray

    def __post_init__(self):
        M = np.ascontiguousarray(np.asarray(self.matrices, dtype=np.float64))
        if M.ndim != 3 or M.shape[1:] != (4, 4):
            raise ValueError(f"matrices must be (m, 4, 4), got {M.shape}")
        R = M[:, :3, :3]
        RtR = np.einsum("jki,jkl->jil", R, R)
        if not np.allclose(RtR, np.eye(3), atol=1e-6):
            raise ValueError("rotation blocks are not orthonormal")
        if np.any(np.linalg.det(R) < 0):
            raise ValueError("rotation blocks must have determinant +1")
        object.__setattr__(self, "matrices", M)

    def __len__(self) -> int:
        return len(self.matrices)

    def compose_global(self, R: np.ndarray, t: np.ndarray) -> "JointTransforms":
        """Pre-compose a global rigid motion: G . T_j for every joint."""
        G = make_rigid(R, t)
        return JointTransforms(G[None] @ self.matrices)


@dataclass(frozen=True)
class DaPoseConfig:
    """Canonical-pose construction: hip joints abducted about the forward axis.

    The positive angle is applied to ``left_hip``, the negative to
    ``right_hip``. The 30-degree default is a configuration choice, not a
    measured constant; skeleton conventions vary.
    """

    left_hip: str = "hip_l"
    right_hip: str = "hip_r"
    angle: float = np.deg2rad(30.0)
    forward_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def as_pose(self, mesh: SkinnedMesh) -> Pose:
        rot = np.zeros((mesh.num_joints, 3))
        axis = np.asarray(self.forward_axis, dtype=np.float64)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError("forward_axis must be nonzero")
        axis = axis / norm
        rot[mesh.joint_index(self.left_hip)] = self.angle * axis
        rot[mesh.joint_index(self.right_hip)] = -self.angle * axis
        return Pose(rot)


def forward_kinematics(mesh: SkinnedMesh, pose: Pose) -> JointTransforms:
    """World transforms composed parent-to-child for every joint.

    The returned matrix for joint j is the posed world transform composed
    with the inverse of the joint's rest transform, so applying it to a
    rest-pose point yields the posed point directly. The root translation is
    folded into the root joint.
    """
    m = mesh.num_joints
    if pose.num_joints != m:
        raise ValueError(f"pose has {pose.num_joints} joints, mesh has {m}")

    local_R = axis_angle_to_matrix(pose.joint_rotations)
    jpos = mesh.joint_positions
    parents = mesh.joint_parents

    world = np.zeros((m, 4, 4))
    for j in mesh.joint_order:
        p = parents[j]
        if p < 0:
            local = make_rigid(local_R[j], jpos[j] + pose.root_translation)
            world[j] = local
        else:
            local = make_rigid(local_R[j], jpos[j] - jpos[p])
            world[j] = world[p] @ local

    # Fold in the inverse rest transform (identity rotation at rest).
    rest_inv = make_rigid(np.broadcast_to(np.eye(3), (m, 3, 3)), -jpos)
    return JointTransforms(world @ rest_inv)


def lbs(
    points: np.ndarray,
    weight_joints: np.ndarray,
    weight_values: np.ndarray,
    transforms: JointTransforms,
) -> np.ndarray:
    """Linear Blend Skinning: out_i = sum_j w_ij (T_j applied to p_i).

    ``weight_joints``/``weight_values`` are the sparse (N, K) form used by
    :class:`SkinnedMesh` and the position texture.
    """
    pts = np.asarray(points, dtype=np.float64)
    wj = np.asarray(weight_joints, dtype=np.int64)
    wv = np.asarray(weight_values, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (N, 3), got {pts.shape}")
    if wj.shape != wv.shape or wj.shape[0] != pts.shape[0]:
        raise ValueError("weight arrays must be (N, K) matching points")
    sums = wv.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > _LBS_ROW_TOL):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"weight row {bad} sums to {sums[bad]:.6f}, not 1")

    M = blend_matrices(wj, wv, transforms)
    return np.einsum("nij,nj->ni", M[:, :3, :3], pts) + M[:, :3, 3]


def blend_matrices(
    weight_joints: np.ndarray,
    weight_values: np.ndarray,
    transforms: JointTransforms,
) -> np.ndarray:
    """Per-point blended 4x4 matrices M_i = sum_j w_ij T_j."""
    gathered = transforms.matrices[weight_joints]  # (N, K, 4, 4)
    return np.einsum("nk,nkij->nij", weight_values, gathered)


def da_pose_transforms(mesh: SkinnedMesh, config: DaPoseConfig) -> JointTransforms:
    """Fixed rest-pose -> Da-pose transform set (legs abducted symmetrically)."""
    return forward_kinematics(mesh, config.as_pose(mesh))


def pose_from_canonical(mesh: SkinnedMesh, pose: Pose) -> JointTransforms:
    """Composite Da-chain transforms mapping rest + offset points to world.

    Per joint this is (Da-pose -> world) composed with (rest -> Da-pose);
    the Da-pose detour cancels joint-wise, so the composite equals plain
    forward kinematics of the target pose. Kept as its own operation because
    callers reason in the canonical (Da-posed) frame; use
    :func:`canonical_to_world` when the factor itself is needed.
    """
    return forward_kinematics(mesh, pose)


def canonical_to_world(
    mesh: SkinnedMesh, pose: Pose, config: DaPoseConfig
) -> JointTransforms:
    """The Da-pose -> world factor: FK(pose) composed with FK(da)^-1."""
    to_world = forward_kinematics(mesh, pose).matrices
    to_da = da_pose_transforms(mesh, config).matrices
    return JointTransforms(to_world @ rigid_inverse(to_da))


# ---------------------------------------------------------------------------
# Loaders. The JSON schema is documented in docs/formats.md.
# ---------------------------------------------------------------------------


def load_mesh_json(path: str | Path) -> SkinnedMesh:
    """Load a mesh+skeleton JSON document (schema version 1)."""
    with open(path) as f:
        doc = json.load(f)
    return mesh_from_dict(doc)


def mesh_from_dict(doc: dict) -> SkinnedMesh:
    version = doc.get("schema_version", 1)
    if version != 1:
        raise ValueError(f"unsupported mesh schema_version {version}")
    vertices = np.asarray(doc["vertices"], dtype=np.float64)
    tris = [t["indices"] for t in doc["triangles"]]
    uvs = [t["uvs"] for t in doc["triangles"]]
    wj, wv = _pack_sparse_weights(doc["weights"], len(vertices))
    joints = doc["joints"]
    names = [j["name"] for j in joints]
    parents = np.asarray(
        [-1 if j["parent"] is None else int(j["parent"]) for j in joints], dtype=np.int64
    )
    positions = np.asarray([j["position"] for j in joints], dtype=np.float64)
    shape_dirs = None
    if "shape_dirs" in doc and doc["shape_dirs"] is not None:
        shape_dirs = np.asarray(doc["shape_dirs"], dtype=np.float64)
    return SkinnedMesh(
        vertices=vertices,
        triangles=np.asarray(tris, dtype=np.int64),
        uvs=np.asarray(uvs, dtype=np.float64),
        weight_joints=wj,
        weight_values=wv,
        joint_names=names,
        joint_parents=parents,
        joint_positions=positions,
        shape_dirs=shape_dirs,
    )


def mesh_to_dict(mesh: SkinnedMesh) -> dict:
    weights = []
    for joints_row, values_row in zip(mesh.weight_joints, mesh.weight_values):
        row = [[int(j), float(w)] for j, w in zip(joints_row, values_row) if w > 0.0]
        weights.append(row)
    return {
        "schema_version": 1,
        "vertices": mesh.vertices.tolist(),
        "triangles": [
            {"indices": tri.tolist(), "uvs": uv.tolist()}
            for tri, uv in zip(mesh.triangles, mesh.uvs)
        ],
        "weights": weights,
        "joints": [
            {
                "name": name,
                "parent": None if parent < 0 else int(parent),
                "position": pos.tolist(),
            }
            for name, parent, pos in zip(
                mesh.joint_names, mesh.joint_parents, mesh.joint_positions
            )
        ],
    }


def _pack_sparse_weights(rows: list, num_vertices: int) -> tuple[np.ndarray, np.ndarray]:
    if len(rows) != num_vertices:
        raise ValueError(f"expected {num_vertices} weight rows, got {len(rows)}")
    width = max(1, max(len(r) for r in rows))
    if width > MAX_WEIGHTS_PER_VERTEX:
        raise ValueError(
            f"at most {MAX_WEIGHTS_PER_VERTEX} joints per vertex supported, got {width}"
        )
    wj = np.zeros((num_vertices, width), dtype=np.int64)
    wv = np.zeros((num_vertices, width), dtype=np.float64)
    for i, row in enumerate(rows):
        for k, (j, w) in enumerate(row):
            wj[i, k] = int(j)
            wv[i, k] = float(w)
    return wj, wv


def load_obj_with_weights(obj_path: str | Path, weights_path: str | Path) -> SkinnedMesh:
    """Wavefront OBJ geometry (v/vt/f) merged with a skeleton+weights JSON.

    The weights JSON carries the ``weights``, ``joints``, and optional
    ``shape_dirs`` sections of the mesh schema, indexed against the OBJ's
    vertex order.
    """
    positions: list[list[float]] = []
    texcoords: list[list[float]] = []
    faces: list[list[tuple[int, int]]] = []
    with open(obj_path) as f:
        for line in f:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                positions.append([float(x) for x in parts[1:4]])
            elif parts[0] == "vt":
                texcoords.append([float(x) for x in parts[1:3]])
            elif parts[0] == "f":
                corner = []
                for token in parts[1:]:
                    fields = token.split("/")
                    vi = int(fields[0])
                    if len(fields) < 2 or fields[1] == "":
                        raise ValueError("OBJ faces must carry vt indices (v/vt)")
                    ti = int(fields[1])
                    # OBJ indices are 1-based; negatives count from the end.
                    vi = vi - 1 if vi > 0 else len(positions) + vi
                    ti = ti - 1 if ti > 0 else len(texcoords) + ti
                    corner.append((vi, ti))
                for k in range(1, len(corner) - 1):  # fan-triangulate
                    faces.append([corner[0], corner[k], corner[k + 1]])

    with open(weights_path) as f:
        rig = json.load(f)
    wj, wv = _pack_sparse_weights(rig["weights"], len(positions))
    joints = rig["joints"]
    return SkinnedMesh(
        vertices=np.asarray(positions, dtype=np.float64),
        triangles=np.asarray([[c[0] for c in face] for face in faces], dtype=np.int64),
        uvs=np.asarray(
            [[texcoords[c[1]] for c in face] for face in faces], dtype=np.float64
        ),
        weight_joints=wj,
        weight_values=wv,
        joint_names=[j["name"] for j in joints],
        joint_parents=np.asarray(
            [-1 if j["parent"] is None else int(j["parent"]) for j in joints],
            dtype=np.int64,
        ),
        joint_positions=np.asarray([j["position"] for j in joints], dtype=np.float64),
        shape_dirs=np.asarray(rig["shape_dirs"], dtype=np.float64)
        if rig.get("shape_dirs") is not None
        else None,
    )
