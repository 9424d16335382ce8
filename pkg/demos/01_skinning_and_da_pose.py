"""Skinning basics on the bundled toy body.

Poses the skinned mesh with forward kinematics + LBS, converts it to the
canonical Da-pose, and writes the vertex clouds as PLY files you can drop
into any point-cloud viewer.
"""

import numpy as np

from skinsplat import Pose, da_pose_transforms, forward_kinematics, lbs
from skinsplat.ply import write_ply
from skinsplat.samples import body_da_pose_config, make_test_body, make_test_pose

from _common import out_dir


def dump(path, points):
    write_ply(path, {"x": points[:, 0], "y": points[:, 1], "z": points[:, 2]})


def main():
    out = out_dir("01_skinning")
    mesh = make_test_body()
    print(f"toy body: {mesh.num_vertices} vertices, {mesh.num_joints} joints "
          f"({', '.join(mesh.joint_names[:5])}, ...)")

    # Rest pose: transforms are exactly the identity.
    rest = forward_kinematics(mesh, Pose.identity(mesh.num_joints))
    assert np.allclose(rest.matrices, np.eye(4))
    dump(out / "rest.ply", mesh.vertices)

    # A random pose, skinned through the sparse LBS weights.
    pose = make_test_pose(mesh, seed=3, magnitude=0.5)
    posed = lbs(mesh.vertices, mesh.weight_joints, mesh.weight_values,
                forward_kinematics(mesh, pose))
    dump(out / "posed.ply", posed)
    print(f"posed mesh spans y in [{posed[:, 1].min():.2f}, {posed[:, 1].max():.2f}] m")

    # The canonical Da-pose: legs abducted +-30 degrees about the forward axis.
    config = body_da_pose_config()
    da = lbs(mesh.vertices, mesh.weight_joints, mesh.weight_values,
             da_pose_transforms(mesh, config))
    dump(out / "da_pose.ply", da)
    ankles = [mesh.joint_index("ankle_l"), mesh.joint_index("ankle_r")]
    feet = np.isin(mesh.weight_joints[:, 0], ankles)  # ankle-driven verts
    spread_rest = np.ptp(mesh.vertices[feet, 0])
    spread_da = np.ptp(da[feet, 0])
    print(f"leg abduction widens the feet x-spread from {spread_rest:.2f} to {spread_da:.2f} m")
    print(f"wrote {out}/rest.ply, posed.ply, da_pose.ply")


if __name__ == "__main__":
    main()
