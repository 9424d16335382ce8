import json
from pathlib import Path

import numpy as np
import pytest

from skinsplat.body import SkinnedMesh
from skinsplat.errors import EmptyTextureError
from skinsplat.texture import (
    bake,
    extract_points,
    interpolate_position,
    load_texture,
    save_texture,
)

GOLDEN = json.loads((Path(__file__).parent / "golden" / "texture_counts.json").read_text())


def make_single_triangle_mesh(uv_corners, vertices=None):
    if vertices is None:
        vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return SkinnedMesh(
        vertices=vertices,
        triangles=np.array([[0, 1, 2]]),
        uvs=np.asarray([uv_corners], dtype=np.float64),
        weight_joints=np.array([[0], [0], [1]]),
        weight_values=np.ones((3, 1)),
        joint_names=["a", "b"],
        joint_parents=np.array([-1, 0]),
        joint_positions=np.zeros((2, 3)),
    )


def test_right_triangle_bary_solved_by_hand():
    # Triangle covering UV (0,0), (1,0), (0,1) at resolution 2: texel (0,0)
    # has center (0.25, 0.25). Solving the 2x2 barycentric system by hand:
    # b1 = 0.25, b2 = 0.25, b0 = 0.5.
    mesh = make_single_triangle_mesh([[0, 0], [1, 0], [0, 1]])
    tex = bake(mesh, 2)
    idx = np.flatnonzero(tex.texel_indices == 0)
    assert len(idx) == 1
    assert np.allclose(tex.barycentrics[idx[0]], [0.5, 0.25, 0.25], atol=1e-12)


def test_texel_center_on_vertex_uv_gets_vertex_position():
    # Vertex 0 maps to UV (0.25, 0.25), exactly the center of texel (0,0)
    # at resolution 2: the baked position equals the rest position exactly.
    mesh = make_single_triangle_mesh([[0.25, 0.25], [1.0, 0.25], [0.25, 1.0]])
    tex = bake(mesh, 2)
    idx = np.flatnonzero(tex.texel_indices == 0)
    assert len(idx) == 1
    assert np.array_equal(tex.positions[idx[0]], mesh.vertices[0])
    assert np.allclose(tex.barycentrics[idx[0]], [1.0, 0.0, 0.0], atol=1e-12)


def test_zero_area_triangles_raise_empty_texture():
    mesh = make_single_triangle_mesh([[0.2, 0.2], [0.8, 0.8], [0.5, 0.5]])  # collinear
    with pytest.raises(EmptyTextureError):
        bake(mesh, 64)


def test_resolution_below_one_rejected(body):
    with pytest.raises(ValueError):
        bake(body, 0)


def test_valid_count_matches_golden_and_grows(body):
    counts = {}
    for res in (128, 256, 512):
        counts[res] = bake(body, res).num_valid
        assert counts[res] == GOLDEN[str(res)]
    assert counts[128] < counts[256] < counts[512]


def test_bake_determinism_byte_exact(body, tmp_path):
    a = bake(body, 128)
    b = bake(body, 128)
    pa, pb = tmp_path / "a.ptex", tmp_path / "b.ptex"
    save_texture(a, pa)
    save_texture(b, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_reprojection_bit_for_bit(body):
    tex = bake(body, 256)
    again = interpolate_position(body, tex.triangle_ids, tex.barycentrics)
    assert np.array_equal(again, tex.positions)


def test_bary_and_weight_invariants(body):
    tex = bake(body, 256)
    assert tex.barycentrics.min() >= 0.0
    assert tex.barycentrics.max() <= 1.0
    assert np.abs(tex.barycentrics.sum(axis=1) - 1.0).max() < 1e-6
    assert np.abs(tex.weight_values.sum(axis=1) - 1.0).max() < 1e-6
    assert tex.weight_values.min() >= 0.0


def test_weight_closure_convexity(body):
    # No interpolated weight may exceed the max of its three source weights
    # for the same joint (convex combination; renormalization only corrects
    # float round-off).
    tex = bake(body, 64)
    corner_vids = body.triangles[tex.triangle_ids]
    for i in range(0, tex.num_valid, 97):
        dense_src = np.zeros((3, body.num_joints))
        for c in range(3):
            vid = corner_vids[i, c]
            # Scatter-add: padded weight slots reuse joint index 0 with value 0.
            np.add.at(dense_src[c], body.weight_joints[vid], body.weight_values[vid])
        src_max = dense_src.max(axis=0)
        dense_out = np.zeros(body.num_joints)
        np.add.at(dense_out, tex.weight_joints[i], tex.weight_values[i])
        assert np.all(dense_out <= src_max + 1e-12)


def test_seam_overlap_resolves_to_lowest_triangle():
    # Two triangles sharing the diagonal of the unit UV square: every texel
    # center on the diagonal is claimed by the earlier triangle.
    mesh = SkinnedMesh(
        vertices=np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]]),
        triangles=np.array([[0, 1, 2], [1, 3, 2]]),
        uvs=np.array(
            [
                [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
                [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            ]
        ),
        weight_joints=np.zeros((4, 1), dtype=np.int64),
        weight_values=np.ones((4, 1)),
        joint_names=["a"],
        joint_parents=np.array([-1]),
        joint_positions=np.zeros((1, 3)),
    )
    tex = bake(mesh, 8)
    assert tex.num_valid == 64  # full coverage
    v, u = np.divmod(tex.texel_indices, 8)
    on_diagonal = u + v == 7  # centers with u+v == 1 in UV
    assert np.all(tex.triangle_ids[on_diagonal] == 0)


class TestExtraction:
    def test_one_point_per_texel_in_row_major_order(self, body):
        tex = bake(body, 128)
        pts = extract_points(tex)
        assert len(pts.positions) == tex.num_valid
        assert np.array_equal(pts.texel_indices, np.sort(pts.texel_indices))
        assert np.array_equal(pts.texel_indices, tex.texel_indices)

    def test_extraction_is_stable_across_runs(self, body):
        a = extract_points(bake(body, 64))
        b = extract_points(bake(body, 64))
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.texel_indices, b.texel_indices)

    def test_empty_texture_rejected(self, body):
        tex = bake(body, 64)
        empty = tex.__class__(
            width=4,
            height=4,
            texel_indices=np.zeros(0, dtype=np.int64),
            positions=np.zeros((0, 3)),
            triangle_ids=np.zeros(0, dtype=np.int64),
            barycentrics=np.zeros((0, 3)),
            weight_joints=np.zeros((0, 1), dtype=np.int64),
            weight_values=np.zeros((0, 1)),
        )
        with pytest.raises(ValueError, match="no valid texels"):
            extract_points(empty)


def test_texture_round_trip(body, tmp_path):
    tex = bake(body, 64)
    path = tmp_path / "body.ptex"
    save_texture(tex, path)
    loaded = load_texture(path)
    assert loaded.width == tex.width and loaded.height == tex.height
    for field in ("texel_indices", "positions", "triangle_ids", "barycentrics",
                  "weight_joints", "weight_values"):
        assert np.array_equal(getattr(loaded, field), getattr(tex, field)), field
