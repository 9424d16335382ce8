import numpy as np

from skinsplat.render import Camera, DEFAULT_CONFIG, RasterConfig, project, render
from skinsplat.render.rasterizer import human_coverage_mask, render_human_only
from skinsplat.rotations import random_rotation
from skinsplat.scene import RenderableScene


def make_camera(width=32, height=32, fx=40.0, cx=None, cy=None, R=None, t=None):
    return Camera(
        fx=fx,
        fy=fx,
        cx=width / 2.0 if cx is None else cx,
        cy=height / 2.0 if cy is None else cy,
        rotation=np.eye(3) if R is None else R,
        translation=np.zeros(3) if t is None else t,
        width=width,
        height=height,
    )


def make_scene(positions, scales, opacities, colors, is_human=None):
    n = len(positions)
    covs = np.einsum("n,ij->nij", np.asarray(scales, dtype=np.float64) ** 2, np.eye(3))
    return RenderableScene(
        positions=np.asarray(positions, dtype=np.float64),
        covariances=covs,
        opacities=np.asarray(opacities, dtype=np.float64),
        colors=np.asarray(colors, dtype=np.float64),
        is_human=np.zeros(n, dtype=bool) if is_human is None else np.asarray(is_human),
    )


def random_scene(rng, n=25, opacity_max=0.9, human_fraction=0.0):
    is_human = rng.uniform(size=n) < human_fraction
    return make_scene(
        positions=rng.uniform(-0.6, 0.6, (n, 3)) + [0, 0, 2.5],
        scales=rng.uniform(0.02, 0.12, n),
        opacities=rng.uniform(0.05, opacity_max, n),
        colors=rng.uniform(0, 1, (n, 3)),
        is_human=is_human,
    )


def reference_over_compositor(scene, camera, config=DEFAULT_CONFIG):
    """Independent oracle: per-pixel back-to-front 'over' blending in numpy.

    Shares only the projection (verified symbolically elsewhere); no tiles,
    no front-to-back accumulation, no transmittance cutoff.
    """
    splats = project(scene, camera, config)
    order = np.argsort(splats.depths, kind="stable")[::-1]  # far to near
    rgb = np.tile(np.asarray(config.background_color), (camera.height, camera.width, 1))
    ys, xs = np.mgrid[0 : camera.height, 0 : camera.width]
    px = xs + 0.5
    py = ys + 0.5
    for i in order:
        cov = splats.cov2d[i]
        cinv = np.linalg.inv(cov)
        rx = config.sigma_cutoff * np.sqrt(cov[0, 0])
        ry = config.sigma_cutoff * np.sqrt(cov[1, 1])
        dx = px - splats.means2d[i, 0]
        dy = py - splats.means2d[i, 1]
        power = -0.5 * (cinv[0, 0] * dx**2 + 2 * cinv[0, 1] * dx * dy + cinv[1, 1] * dy**2)
        alpha = np.minimum(config.alpha_clamp, splats.opacities[i] * np.exp(power))
        alpha = np.where((np.abs(dx) <= rx) & (np.abs(dy) <= ry), alpha, 0.0)
        rgb = splats.colors[i] * alpha[..., None] + (1 - alpha[..., None]) * rgb
    return rgb


class TestProjection:
    def test_on_axis_gaussian_matches_symbolic_jacobian(self):
        # A unit-covariance Gaussian on the optical axis at depth z projects
        # to mean (cx, cy), cov2d = (f/z)^2 I + 0.3 I (Jacobian evaluated
        # symbolically for x = y = 0).
        z = 2.0
        cam = make_camera()
        scene = make_scene([[0, 0, z]], [1.0], [0.5], [[1, 0, 0]])
        splats = project(scene, cam)
        assert np.allclose(splats.means2d[0], [cam.cx, cam.cy], atol=1e-12)
        expected = (cam.fx / z) ** 2 * np.eye(2) + 0.3 * np.eye(2)
        assert np.allclose(splats.cov2d[0], expected, atol=1e-9)

    def test_behind_camera_culled(self):
        cam = make_camera()
        scene = make_scene([[0, 0, -1.0], [0, 0, 2.0]], [0.05, 0.05], [0.5, 0.5],
                           [[1, 0, 0], [0, 1, 0]])
        splats = project(scene, cam)
        assert len(splats.scene_indices) == 1
        assert splats.scene_indices[0] == 1

    def test_depths_are_camera_z(self):
        cam = make_camera()
        scene = make_scene([[0, 0, 1.0], [0.1, 0, 2.0]], [0.05, 0.05], [0.5, 0.5],
                           [[1, 0, 0], [0, 1, 0]])
        splats = project(scene, cam)
        assert np.allclose(sorted(splats.depths), [1.0, 2.0], atol=1e-12)


class TestRenderBasics:
    def test_single_splat_identity_within_one_percent(self):
        cam = make_camera(cx=16.5, cy=16.5)  # mean lands on a pixel center
        scene = make_scene([[0, 0, 2.0]], [0.2], [0.9999], [[1.0, 0.8, 0.3]])
        img = render(scene, cam)
        center = img.rgb[16, 16]
        assert np.all(np.abs(center - np.array([1.0, 0.8, 0.3])) <= 0.0101)

    def test_two_overlapping_splats_hand_formula(self):
        # Front opacity a, back opacity b, both kernels equal to 1 at the
        # pixel: C = c1 a + c2 b (1 - a) by direct evaluation of the
        # compositing sum.
        a, b = 0.6, 0.4
        c1 = np.array([1.0, 0.0, 0.0])
        c2 = np.array([0.0, 1.0, 0.0])
        cam = make_camera(cx=16.5, cy=16.5)
        scene = make_scene(
            [[0, 0, 1.5], [0, 0, 3.0]], [0.3, 0.6], [a, b], [c1, c2]
        )
        img = render(scene, cam)
        expected = c1 * a + c2 * b * (1 - a)
        assert np.allclose(img.rgb[16, 16], expected, atol=1e-9)

    def test_empty_scene_renders_background(self):
        cam = make_camera()
        scene = make_scene(np.zeros((0, 3)), np.zeros(0), np.zeros(0), np.zeros((0, 3)))
        img = render(scene, cam)
        assert np.all(img.rgb == 0.0)
        cfg = RasterConfig(background_color=(0.2, 0.4, 0.6))
        img2 = render(scene, cam, cfg)
        assert np.allclose(img2.rgb, [0.2, 0.4, 0.6], atol=1e-12)

    def test_stats_report_culled(self):
        cam = make_camera()
        scene = make_scene([[0, 0, -1.0], [0, 0, 2.0]], [0.05, 0.05], [0.5, 0.5],
                           [[1, 0, 0], [0, 1, 0]])
        img = render(scene, cam)
        assert img.stats.num_culled == 1
        assert img.stats.num_drawn == 1

    def test_non_invertible_cov2d_skipped_and_counted(self):
        # A corrupt covariance is dropped (not an error) and counted; the
        # remaining splats render as if it were absent.
        cam = make_camera(cx=16.5, cy=16.5)
        good = make_scene([[0, 0, 2.0]], [0.2], [0.8], [[0.2, 0.9, 0.4]])
        bad_cov = np.concatenate([good.covariances, [np.full((3, 3), np.nan)]])
        both = RenderableScene(
            positions=np.concatenate([good.positions, [[0.1, 0.1, 1.5]]]),
            covariances=bad_cov,
            opacities=np.concatenate([good.opacities, [0.9]]),
            colors=np.concatenate([good.colors, [[1.0, 0.0, 0.0]]]),
            is_human=np.zeros(2, dtype=bool),
        )
        img = render(both, cam)
        assert img.stats.num_skipped == 1
        assert np.array_equal(img.rgb, render(good, cam).rgb)

    def test_debug_checks_assert_transmittance_bound(self, rng):
        cam = make_camera()
        scene = random_scene(rng, n=10)
        img = render(scene, cam, RasterConfig(debug_checks=True))
        assert img.alpha.max() <= 1.0 + 1e-12


class TestRenderProperties:
    def test_transmittance_bound_over_random_scenes(self, rng):
        cam = make_camera(width=24, height=24)
        for _ in range(100):
            scene = random_scene(rng, n=20)
            img = render(scene, cam)
            assert img.alpha.max() <= 1.0 + 1e-12
            assert img.alpha.min() >= 0.0

    def test_input_permutation_invariance(self, rng):
        cam = make_camera()
        scene = random_scene(rng, n=30)
        img = render(scene, cam)
        perm = rng.permutation(len(scene))
        permuted = RenderableScene(
            positions=scene.positions[perm],
            covariances=scene.covariances[perm],
            opacities=scene.opacities[perm],
            colors=scene.colors[perm],
            is_human=scene.is_human[perm],
        )
        img2 = render(permuted, cam)
        assert np.abs(img.rgb - img2.rgb).max() < 1e-6

    def test_front_to_back_matches_back_to_front_oracle(self, rng):
        # Scenes kept below the early-out regime (final transmittance well
        # above 1e-4) so the two formulations must agree to float precision.
        cam = make_camera(width=24, height=24)
        for _ in range(5):
            scene = random_scene(rng, n=8, opacity_max=0.5)
            img = render(scene, cam)
            assert img.alpha.max() <= 1.0 - 1e-3, "fixture hit the early-out regime"
            oracle = reference_over_compositor(scene, cam)
            assert np.abs(img.rgb - oracle).max() < 1e-5

    def test_rigid_scene_and_camera_invariance(self, rng):
        cam = make_camera()
        scene = random_scene(rng, n=25)
        img = render(scene, cam)
        G = random_rotation(rng)
        tg = rng.normal(size=3)
        moved = RenderableScene(
            positions=scene.positions @ G.T + tg,
            covariances=np.einsum("ij,njk,lk->nil", G, scene.covariances, G),
            opacities=scene.opacities,
            colors=scene.colors,
            is_human=scene.is_human,
        )
        cam2 = Camera(
            fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy,
            rotation=cam.rotation @ G.T,
            translation=cam.translation - cam.rotation @ G.T @ tg,
            width=cam.width, height=cam.height,
        )
        img2 = render(moved, cam2)
        assert np.abs(img.rgb - img2.rgb).max() < 1e-5

    def test_thread_count_does_not_change_output(self, rng, monkeypatch):
        cam = make_camera(width=48, height=48)
        scene = random_scene(rng, n=60)
        monkeypatch.setenv("SKINSPLAT_THREADS", "1")
        img1 = render(scene, cam)
        monkeypatch.setenv("SKINSPLAT_THREADS", "4")
        img4 = render(scene, cam)
        assert np.array_equal(img1.rgb, img4.rgb)
        assert np.array_equal(img1.alpha, img4.alpha)


class TestHumanOnly:
    def test_human_only_ignores_background(self, rng):
        cam = make_camera()
        scene = random_scene(rng, n=30, human_fraction=0.4)
        human_img, mask = render_human_only(scene, cam)
        only_human = RenderableScene(
            positions=scene.positions[scene.is_human],
            covariances=scene.covariances[scene.is_human],
            opacities=scene.opacities[scene.is_human],
            colors=scene.colors[scene.is_human],
            is_human=scene.is_human[scene.is_human],
        )
        direct = render(only_human, cam)
        assert np.array_equal(human_img.rgb, direct.rgb)
        assert np.array_equal(mask, direct.alpha > 0.5)

    def test_coverage_mask_bounds_pose_footprint(self, rng):
        cam = make_camera()
        scene = random_scene(rng, n=30, human_fraction=0.4)
        mask = human_coverage_mask(scene, cam)
        base = render(scene, cam)
        no_human = RenderableScene(
            positions=scene.positions[~scene.is_human],
            covariances=scene.covariances[~scene.is_human],
            opacities=scene.opacities[~scene.is_human],
            colors=scene.colors[~scene.is_human],
            is_human=scene.is_human[~scene.is_human],
        )
        bg_only = render(no_human, cam)
        delta = np.abs(base.rgb - bg_only.rgb).max(axis=2)
        assert delta[~mask].max() < 1e-6
