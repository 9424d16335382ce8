import numpy as np
import pytest

from skinsplat.body import Pose, SkinnedMesh
from skinsplat.samples import make_test_body, body_da_pose_config


@pytest.fixture(scope="session")
def body():
    return make_test_body()


@pytest.fixture(scope="session")
def da_config():
    return body_da_pose_config()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_chain_mesh(offsets):
    """Minimal mesh whose skeleton is a single chain with the given offsets.

    Vertices sit at the joint positions (one per joint, fully weighted to
    that joint); one degenerate-free UV triangle keeps the mesh valid.
    """
    positions = np.cumsum(np.asarray(offsets, dtype=np.float64), axis=0)
    m = len(positions)
    vertices = positions.copy()
    if m < 3:
        vertices = np.vstack([vertices, np.tile(vertices[-1], (3 - m, 1))])
    triangles = np.array([[0, 1, 2]])
    uvs = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    wj = np.zeros((len(vertices), 1), dtype=np.int64)
    wj[:m, 0] = np.arange(m)
    wv = np.ones((len(vertices), 1))
    return SkinnedMesh(
        vertices=vertices,
        triangles=triangles,
        uvs=uvs,
        weight_joints=wj,
        weight_values=wv,
        joint_names=[f"j{i}" for i in range(m)],
        joint_parents=np.arange(-1, m - 1),
        joint_positions=positions,
    )


@pytest.fixture
def two_joint_chain():
    """Root at the origin, child offset (0, 1, 0)."""
    return make_chain_mesh([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


def random_pose(mesh, rng, magnitude=np.pi):
    rotations = rng.uniform(-magnitude, magnitude, size=(mesh.num_joints, 3))
    translation = rng.uniform(-1.0, 1.0, size=3)
    return Pose(rotations, translation)
