"""Finite-difference validation of the rasterizer's analytic gradients."""

import numpy as np
import pytest

from skinsplat.render import Camera, render, render_backward
from skinsplat.scene import RenderableScene, logit, sigmoid

from test_render import make_camera, make_scene


def random_grad_scene(rng, n=5):
    """Small scene with opacities kept clear of the 0.99 alpha clamp."""
    return make_scene(
        positions=rng.uniform(-0.5, 0.5, (n, 3)) + [0, 0, 2.5],
        scales=rng.uniform(0.05, 0.15, n),
        opacities=rng.uniform(0.1, 0.8, n),
        colors=rng.uniform(0.1, 0.9, (n, 3)),
    )


def scene_with(scene, **overrides):
    fields = {
        "positions": scene.positions,
        "covariances": scene.covariances,
        "opacities": scene.opacities,
        "colors": scene.colors,
        "is_human": scene.is_human,
    }
    fields.update(overrides)
    return RenderableScene(**fields)


def weighted_loss(scene, camera, weights):
    return float((render(scene, camera).rgb * weights).sum())


def test_single_splat_color_gradient_is_alpha_at_center():
    # L = center-pixel value: dL/d(color channel) = alpha' at that pixel,
    # differentiating the single-splat compositing by hand.
    cam = make_camera(cx=16.5, cy=16.5)
    opacity = 0.7
    scene = make_scene([[0, 0, 2.0]], [0.25], [opacity], [[0.3, 0.5, 0.9]])
    d_rgb = np.zeros((32, 32, 3))
    d_rgb[16, 16, 1] = 1.0
    bufs = render_backward(scene, cam, d_rgb)
    # Kernel value at the exact center is 1, so alpha' = opacity.
    assert bufs.d_color[0, 1] == pytest.approx(opacity, abs=1e-12)
    assert bufs.d_color[0, 0] == 0.0


def test_fully_occluded_gaussian_gets_zero_gradients():
    cam = make_camera(cx=16.5, cy=16.5)
    # Three clamped-alpha occluders drive the transmittance below the 1e-4
    # cutoff everywhere the back splat lives, so compositing never reaches
    # it and all of its gradients are exactly zero.
    scene = make_scene(
        positions=[[0, 0, 1.0], [0, 0, 1.2], [0, 0, 1.4], [0, 0, 3.0]],
        scales=[2.0, 2.0, 2.0, 0.05],
        opacities=[0.9999, 0.9999, 0.9999, 0.8],
        colors=[[1, 0, 0], [1, 0, 0], [1, 0, 0], [0, 1, 0]],
    )
    d_rgb = np.ones((32, 32, 3))
    bufs = render_backward(scene, cam, d_rgb)
    assert np.all(bufs.d_color[3] == 0.0)
    assert bufs.d_opacity_logit[3] == 0.0
    assert np.all(bufs.d_position[3] == 0.0)


@pytest.mark.parametrize("seed", range(3))
def test_color_and_opacity_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    cam = make_camera(width=32, height=32)
    scene = random_grad_scene(rng)
    weights = rng.normal(size=(32, 32, 3))
    bufs = render_backward(scene, cam, weights)

    h = 1e-4
    max_rel = 0.0
    for i in range(len(scene)):
        for ch in range(3):
            cp = scene.colors.copy()
            cm = scene.colors.copy()
            cp[i, ch] += h
            cm[i, ch] -= h
            fd = (
                weighted_loss(scene_with(scene, colors=cp), cam, weights)
                - weighted_loss(scene_with(scene, colors=cm), cam, weights)
            ) / (2 * h)
            denom = max(abs(fd), 1e-6)
            max_rel = max(max_rel, abs(bufs.d_color[i, ch] - fd) / denom)
        lg = logit(scene.opacities)
        lp, lm = lg.copy(), lg.copy()
        lp[i] += h
        lm[i] -= h
        fd = (
            weighted_loss(scene_with(scene, opacities=sigmoid(lp)), cam, weights)
            - weighted_loss(scene_with(scene, opacities=sigmoid(lm)), cam, weights)
        ) / (2 * h)
        denom = max(abs(fd), 1e-6)
        max_rel = max(max_rel, abs(bufs.d_opacity_logit[i] - fd) / denom)
    assert max_rel < 1e-3


@pytest.mark.parametrize("seed", range(3))
def test_position_and_scale_gradients_match_finite_differences(seed):
    # Camera with a non-identity rotation: the covariance-through-Jacobian
    # path degenerates to the mean path only for identity extrinsics, so an
    # axis-aligned camera would mask errors there.
    rng = np.random.default_rng(100 + seed)
    cam = Camera.looking_at(
        eye=(0.8, 0.6, 0.3), target=(0, 0, 2.5), up=(0.1, 1.0, 0.0),
        fov_deg=60.0, width=32, height=32,
    )
    n = 5
    positions = rng.uniform(-0.5, 0.5, (n, 3)) + [0, 0, 2.5]
    log_scales = rng.uniform(np.log(0.05), np.log(0.15), n)
    opacities = rng.uniform(0.1, 0.8, n)
    colors = rng.uniform(0.1, 0.9, (n, 3))
    weights = rng.normal(size=(32, 32, 3))

    def build(pos, ls):
        return make_scene(pos, np.exp(ls), opacities, colors)

    scene = build(positions, log_scales)
    bufs = render_backward(scene, cam, weights)
    d_log_scale = bufs.isotropic_log_scale_grad(scene.covariances)

    h = 1e-5
    for i in range(n):
        for k in range(3):
            pp, pm = positions.copy(), positions.copy()
            pp[i, k] += h
            pm[i, k] -= h
            fd = (
                weighted_loss(build(pp, log_scales), cam, weights)
                - weighted_loss(build(pm, log_scales), cam, weights)
            ) / (2 * h)
            assert bufs.d_position[i, k] == pytest.approx(fd, rel=2e-3, abs=1e-5)
        lp, lm = log_scales.copy(), log_scales.copy()
        lp[i] += h
        lm[i] -= h
        fd = (
            weighted_loss(build(positions, lp), cam, weights)
            - weighted_loss(build(positions, lm), cam, weights)
        ) / (2 * h)
        assert d_log_scale[i] == pytest.approx(fd, rel=2e-3, abs=1e-5)


def test_gradient_buffer_shapes_match_scene(rng):
    cam = make_camera()
    scene = random_grad_scene(rng, n=7)
    bufs = render_backward(scene, cam, np.ones((32, 32, 3)))
    assert bufs.d_color.shape == (7, 3)
    assert bufs.d_opacity_logit.shape == (7,)
    assert bufs.d_position.shape == (7, 3)
    assert bufs.d_cov_world.shape == (7, 3, 3)


def test_mismatched_image_shape_rejected(rng):
    cam = make_camera()
    scene = random_grad_scene(rng)
    with pytest.raises(ValueError, match="does not match"):
        render_backward(scene, cam, np.ones((16, 16, 3)))


def test_backward_deterministic_across_thread_counts(rng, monkeypatch):
    cam = make_camera(width=48, height=48)
    scene = random_grad_scene(rng, n=40)
    weights = rng.normal(size=(48, 48, 3))
    monkeypatch.setenv("SKINSPLAT_THREADS", "1")
    a = render_backward(scene, cam, weights)
    monkeypatch.setenv("SKINSPLAT_THREADS", "4")
    b = render_backward(scene, cam, weights)
    assert np.array_equal(a.d_color, b.d_color)
    assert np.array_equal(a.d_opacity_logit, b.d_opacity_logit)
    assert np.array_equal(a.d_position, b.d_position)
    assert np.array_equal(a.d_cov_world, b.d_cov_world)
