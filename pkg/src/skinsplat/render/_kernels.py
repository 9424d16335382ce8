"""Numba-compiled tile rasterization kernels.

Tiles are rendered independently (prange); every pixel's compositing loop
walks its tile's depth-ordered splat list, so the output is bitwise
identical regardless of tile scheduling or thread count. The backward
kernel recomputes the forward per pixel instead of storing per-pixel
contribution lists, writing per-(tile, list-slot) gradients that the caller
reduces deterministically.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True)
def count_tile_splats(means, radii, n_tiles_x, n_tiles_y, tile_size):
    counts = np.zeros(n_tiles_x * n_tiles_y, dtype=np.int64)
    for i in range(means.shape[0]):
        tx0 = int(np.floor((means[i, 0] - radii[i, 0]) / tile_size))
        tx1 = int(np.floor((means[i, 0] + radii[i, 0]) / tile_size))
        ty0 = int(np.floor((means[i, 1] - radii[i, 1]) / tile_size))
        ty1 = int(np.floor((means[i, 1] + radii[i, 1]) / tile_size))
        if tx0 < 0:
            tx0 = 0
        if ty0 < 0:
            ty0 = 0
        if tx1 > n_tiles_x - 1:
            tx1 = n_tiles_x - 1
        if ty1 > n_tiles_y - 1:
            ty1 = n_tiles_y - 1
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                counts[ty * n_tiles_x + tx] += 1
    return counts


@njit(cache=True)
def fill_tile_splats(means, radii, n_tiles_x, n_tiles_y, tile_size, offsets):
    cursor = offsets[:-1].copy()
    total = offsets[-1]
    tile_splats = np.empty(total, dtype=np.int64)
    # Iterating splats in depth order keeps each tile's list depth-ordered.
    for i in range(means.shape[0]):
        tx0 = int(np.floor((means[i, 0] - radii[i, 0]) / tile_size))
        tx1 = int(np.floor((means[i, 0] + radii[i, 0]) / tile_size))
        ty0 = int(np.floor((means[i, 1] - radii[i, 1]) / tile_size))
        ty1 = int(np.floor((means[i, 1] + radii[i, 1]) / tile_size))
        if tx0 < 0:
            tx0 = 0
        if ty0 < 0:
            ty0 = 0
        if tx1 > n_tiles_x - 1:
            tx1 = n_tiles_x - 1
        if ty1 > n_tiles_y - 1:
            ty1 = n_tiles_y - 1
        for ty in range(ty0, ty1 + 1):
            for tx in range(tx0, tx1 + 1):
                t = ty * n_tiles_x + tx
                tile_splats[cursor[t]] = i
                cursor[t] += 1
    return tile_splats


@njit(parallel=True, cache=True)
def forward_kernel(
    width,
    height,
    tile_size,
    n_tiles_x,
    n_tiles_y,
    tile_offsets,
    tile_splats,
    means,
    cinv,
    opacities,
    colors,
    radii,
    bg_color,
    alpha_clamp,
    t_eps,
    out_rgb,
    out_alpha,
):
    for tile in prange(n_tiles_x * n_tiles_y):
        tx = tile % n_tiles_x
        ty = tile // n_tiles_x
        x0 = tx * tile_size
        y0 = ty * tile_size
        x1 = min(x0 + tile_size, width)
        y1 = min(y0 + tile_size, height)
        s0 = tile_offsets[tile]
        s1 = tile_offsets[tile + 1]
        count = s1 - s0
        if count == 0:
            for py in range(y0, y1):
                for px in range(x0, x1):
                    out_rgb[py, px, 0] = bg_color[0]
                    out_rgb[py, px, 1] = bg_color[1]
                    out_rgb[py, px, 2] = bg_color[2]
                    out_alpha[py, px] = 0.0
            continue
        # Splat-outer accumulation over tile-local buffers: total work scales
        # with actual pixel coverage instead of list length x tile area.
        # Every pixel still composites its splats in global depth order, so
        # the result is identical to the pixel-outer formulation.
        th = y1 - y0
        tw = x1 - x0
        acc = np.zeros((th, tw, 3))
        trans = np.ones((th, tw))
        for s in range(s0, s1):
            i = tile_splats[s]
            mx = means[i, 0]
            my = means[i, 1]
            rx = radii[i, 0]
            ry = radii[i, 1]
            # Pixel centers px + 0.5 with |px + 0.5 - mx| <= rx, matching the
            # pixel-outer bounding-box test including its boundary.
            ax0 = int(np.ceil(mx - rx - 0.5))
            ax1 = int(np.floor(mx + rx - 0.5))
            ay0 = int(np.ceil(my - ry - 0.5))
            ay1 = int(np.floor(my + ry - 0.5))
            if ax0 < x0:
                ax0 = x0
            if ay0 < y0:
                ay0 = y0
            if ax1 > x1 - 1:
                ax1 = x1 - 1
            if ay1 > y1 - 1:
                ay1 = y1 - 1
            c0 = cinv[i, 0]
            c1 = cinv[i, 1]
            c2 = cinv[i, 2]
            op = opacities[i]
            cr = colors[i, 0]
            cg = colors[i, 1]
            cb = colors[i, 2]
            for py in range(ay0, ay1 + 1):
                dy = py + 0.5 - my
                ly = py - y0
                for px in range(ax0, ax1 + 1):
                    T = trans[ly, px - x0]
                    if T < t_eps:
                        continue
                    dx = px + 0.5 - mx
                    power = -0.5 * (c0 * dx * dx + c2 * dy * dy) - c1 * dx * dy
                    if power > 0.0:  # numerical guard; the kernel peaks at 1
                        power = 0.0
                    a = op * np.exp(power)
                    if a > alpha_clamp:
                        a = alpha_clamp
                    lx = px - x0
                    acc[ly, lx, 0] += cr * a * T
                    acc[ly, lx, 1] += cg * a * T
                    acc[ly, lx, 2] += cb * a * T
                    trans[ly, lx] = T * (1.0 - a)
        for py in range(y0, y1):
            for px in range(x0, x1):
                T = trans[py - y0, px - x0]
                out_rgb[py, px, 0] = acc[py - y0, px - x0, 0] + bg_color[0] * T
                out_rgb[py, px, 1] = acc[py - y0, px - x0, 1] + bg_color[1] * T
                out_rgb[py, px, 2] = acc[py - y0, px - x0, 2] + bg_color[2] * T
                out_alpha[py, px] = 1.0 - T


@njit(parallel=True, cache=True)
def backward_kernel(
    width,
    height,
    tile_size,
    n_tiles_x,
    n_tiles_y,
    tile_offsets,
    tile_splats,
    means,
    cinv,
    opacities,
    colors,
    radii,
    bg_color,
    alpha_clamp,
    t_eps,
    d_rgb,
    slot_color,
    slot_alpha,
    slot_mean,
    slot_cinv,
):
    for tile in prange(n_tiles_x * n_tiles_y):
        tx = tile % n_tiles_x
        ty = tile // n_tiles_x
        x0 = tx * tile_size
        y0 = ty * tile_size
        x1 = min(x0 + tile_size, width)
        y1 = min(y0 + tile_size, height)
        s0 = tile_offsets[tile]
        s1 = tile_offsets[tile + 1]
        for py in range(y0, y1):
            pyc = py + 0.5
            for px in range(x0, x1):
                pxc = px + 0.5
                v0 = d_rgb[py, px, 0]
                v1 = d_rgb[py, px, 1]
                v2 = d_rgb[py, px, 2]
                if v0 == 0.0 and v1 == 0.0 and v2 == 0.0:
                    continue
                # Forward replay: locate the compositing stop and T_final.
                T = 1.0
                cont = s0
                for s in range(s0, s1):
                    i = tile_splats[s]
                    dx = pxc - means[i, 0]
                    dy = pyc - means[i, 1]
                    if abs(dx) > radii[i, 0] or abs(dy) > radii[i, 1]:
                        cont = s + 1
                        continue
                    power = (
                        -0.5 * (cinv[i, 0] * dx * dx + cinv[i, 2] * dy * dy)
                        - cinv[i, 1] * dx * dy
                    )
                    if power > 0.0:
                        power = 0.0
                    a = opacities[i] * np.exp(power)
                    if a > alpha_clamp:
                        a = alpha_clamp
                    T *= 1.0 - a
                    cont = s + 1
                    if T < t_eps:
                        break
                # Reverse sweep from the last composited splat. The virtual
                # opaque background splat seeds the suffix color.
                suf0 = bg_color[0]
                suf1 = bg_color[1]
                suf2 = bg_color[2]
                for s in range(cont - 1, s0 - 1, -1):
                    i = tile_splats[s]
                    dx = pxc - means[i, 0]
                    dy = pyc - means[i, 1]
                    if abs(dx) > radii[i, 0] or abs(dy) > radii[i, 1]:
                        continue
                    power = (
                        -0.5 * (cinv[i, 0] * dx * dx + cinv[i, 2] * dy * dy)
                        - cinv[i, 1] * dx * dy
                    )
                    if power > 0.0:
                        power = 0.0
                    g_kernel = np.exp(power)
                    a = opacities[i] * g_kernel
                    clamped = a > alpha_clamp
                    if clamped:
                        a = alpha_clamp
                    T_before = T / (1.0 - a)
                    # d pixel / d alpha' = T_before * (color - suffix color)
                    d_aprime = T_before * (
                        v0 * (colors[i, 0] - suf0)
                        + v1 * (colors[i, 1] - suf1)
                        + v2 * (colors[i, 2] - suf2)
                    )
                    w = a * T_before
                    slot_color[s, 0] += v0 * w
                    slot_color[s, 1] += v1 * w
                    slot_color[s, 2] += v2 * w
                    if not clamped:
                        slot_alpha[s] += d_aprime * g_kernel
                        da = d_aprime * a
                        slot_mean[s, 0] += da * (cinv[i, 0] * dx + cinv[i, 1] * dy)
                        slot_mean[s, 1] += da * (cinv[i, 1] * dx + cinv[i, 2] * dy)
                        slot_cinv[s, 0] += da * (-0.5 * dx * dx)
                        slot_cinv[s, 1] += da * (-dx * dy)
                        slot_cinv[s, 2] += da * (-0.5 * dy * dy)
                    suf0 = a * colors[i, 0] + (1.0 - a) * suf0
                    suf1 = a * colors[i, 1] + (1.0 - a) * suf1
                    suf2 = a * colors[i, 2] + (1.0 - a) * suf2
                    T = T_before
