"""Image comparison metrics: SSIM (with its analytic image gradient) and PSNR.

SSIM follows the reference formulation: 11x11 Gaussian window (sigma 1.5),
K1 = 0.01, K2 = 0.03, dynamic range 1.0, Gaussian-weighted statistics,
computed per channel over the valid window region and averaged. The
analytic gradient feeds the fit optimizer and is validated against finite
differences in the test suite.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03
_C1 = (_K1 * 1.0) ** 2
_C2 = (_K2 * 1.0) ** 2
_PAD = SSIM_WINDOW // 2


def _gaussian_taps() -> np.ndarray:
    x = np.arange(SSIM_WINDOW) - _PAD
    w = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    return w / w.sum()


_TAPS = _gaussian_taps()


def _windowed(img: np.ndarray) -> np.ndarray:
    """Gaussian-window local mean per channel, cropped to valid windows."""
    out = correlate1d(img, _TAPS, axis=0, mode="constant")
    out = correlate1d(out, _TAPS, axis=1, mode="constant")
    return out[_PAD:-_PAD, _PAD:-_PAD]


def _spread(value_map: np.ndarray, shape: tuple) -> np.ndarray:
    """Adjoint of :func:`_windowed`: embed the valid map and convolve."""
    full = np.zeros(shape)
    full[_PAD:-_PAD, _PAD:-_PAD] = value_map
    out = correlate1d(full, _TAPS, axis=0, mode="constant")
    return correlate1d(out, _TAPS, axis=1, mode="constant")


def _check_inputs(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if b.ndim == 2:
        b = b[:, :, None]
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {a.shape[:2]}"
        )
    return a, b


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity in [-1, 1]; 1.0 exactly for identical images."""
    a, b = _check_inputs(a, b)
    mu_a = _windowed(a)
    mu_b = _windowed(b)
    e_aa = _windowed(a * a)
    e_bb = _windowed(b * b)
    e_ab = _windowed(a * b)
    var_a = e_aa - mu_a**2
    var_b = e_bb - mu_b**2
    cov = e_ab - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + _C1) * (2.0 * cov + _C2)
    den = (mu_a**2 + mu_b**2 + _C1) * (var_a + var_b + _C2)
    return float(np.mean(num / den))


def ssim_with_grad(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """SSIM value plus d(ssim)/d(a), holding b fixed.

    The gradient has a's shape; channels are independent.
    """
    a, b = _check_inputs(a, b)
    mu_a = _windowed(a)
    mu_b = _windowed(b)
    e_aa = _windowed(a * a)
    e_bb = _windowed(b * b)
    e_ab = _windowed(a * b)
    var_a = e_aa - mu_a**2
    var_b = e_bb - mu_b**2
    cov = e_ab - mu_a * mu_b

    n1 = 2.0 * mu_a * mu_b + _C1
    n2 = 2.0 * cov + _C2
    d1 = mu_a**2 + mu_b**2 + _C1
    d2 = var_a + var_b + _C2
    s_map = (n1 * n2) / (d1 * d2)

    # Partials of S w.r.t. the windowed statistics (mu_a, E[a^2], E[ab]);
    # var_a and cov re-expose mu_a, hence the extra terms.
    ds_dmu = 2.0 * mu_b * (n2 - n1) / (d1 * d2) + 2.0 * mu_a * s_map * (1.0 / d2 - 1.0 / d1)
    ds_deaa = -s_map / d2
    ds_deab = 2.0 * n1 / (d1 * d2)

    count = s_map.size
    grad = (
        _spread(ds_dmu, a.shape)
        + 2.0 * a * _spread(ds_deaa, a.shape)
        + b * _spread(ds_deab, a.shape)
    ) / count
    return float(np.mean(s_map)), grad


def psnr(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(data_range**2 / mse))
