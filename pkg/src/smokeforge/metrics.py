"""PSNR and SSIM over [0,1] frames.

PSNR of identical frames is +inf; sequence averaging never folds the
infinities in silently, it skips them and reports how many were skipped.
"""

import math

import numpy as np
from scipy import ndimage

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"frame shapes differ: {x.shape} vs {y.shape}")
    return x, y


def psnr(a, b):
    """10*log10(1/MSE) for unit-range frames; math.inf when identical."""
    x, y = _pair(a, b)
    for name, f in (("first", x), ("second", y)):
        if f.min() < 0.0 or f.max() > 1.0:
            raise ValueError(f"{name} frame must lie in [0,1]")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def psnr_sequence(pairs):
    """Average PSNR over (a, b) frame pairs, skipping infinite frames.
    Returns {"value": mean-or-None, "infinite_frames": count}."""
    values = []
    infinite = 0
    for a, b in pairs:
        v = psnr(a, b)
        if math.isinf(v):
            infinite += 1
        else:
            values.append(v)
    return {"value": float(np.mean(values)) if values else None,
            "infinite_frames": infinite}


def _ssim_channel(x, y):
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    # 11-tap Gaussian window, sigma 1.5
    truncate = ((SSIM_WINDOW - 1) // 2) / SSIM_SIGMA
    blur = lambda f: ndimage.gaussian_filter(f, SSIM_SIGMA, mode="reflect",
                                             truncate=truncate)
    mu_x = blur(x)
    mu_y = blur(y)
    var_x = blur(x * x) - mu_x * mu_x
    var_y = blur(y * y) - mu_y * mu_y
    cov = blur(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    ssim_map = num / den
    r = SSIM_WINDOW // 2
    return float(ssim_map[r:-r, r:-r].mean())


def ssim(a, b):
    """Mean windowed SSIM (11x11 Gaussian window, sigma 1.5, standard
    stabilizers); channels averaged for color frames."""
    x, y = _pair(a, b)
    if x.ndim == 2:
        x = x[:, :, None]
        y = y[:, :, None]
    if x.shape[0] < SSIM_WINDOW or x.shape[1] < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    return float(np.mean([_ssim_channel(x[:, :, c], y[:, :, c])
                          for c in range(x.shape[2])]))
