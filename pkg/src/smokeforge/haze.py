"""Analytic smoke/haze image math.

Image frames are float arrays in [0, 1], shaped (H, W) or (H, W, C) with
C in {1, 3}. The forward haze model composites clean background and coarse
smoke through a transmission map; the inverse recovers clean foreground
smoke from a frame and a recovered background. Atmospheric light comes from
the dark channel prior. Also hosts the generated-frame decay weights and
the amplitude/phase frequency loss.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

DENOM_FLOOR = 0.02
DARK_CHANNEL_PATCH = 15
DARK_CHANNEL_TOP_FRACTION = 0.001


class FrameError(ValueError):
    pass


def check_frame(arr, name="frame", clip_tol=0.0):
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
        raise FrameError(f"{name} must be (H,W) or (H,W,3), got {a.shape}")
    if not np.isfinite(a).all():
        raise FrameError(f"{name} contains non-finite pixels")
    if a.min() < -clip_tol or a.max() > 1.0 + clip_tol:
        raise FrameError(f"{name} pixels must lie in [0,1]")
    return a


def _match(a, b, name_a, name_b):
    if a.shape[:2] != b.shape[:2]:
        raise FrameError(f"{name_a} {a.shape[:2]} and {name_b} {b.shape[:2]} "
                         "dimensions differ")


def _broadcast_mask(mask, frame):
    if frame.ndim == 3 and mask.ndim == 2:
        return mask[:, :, None]
    return mask


def smooth_mask(mask, sigma=2.0):
    """Gaussian-smooth a [0,1] mask with reflective borders. The kernel is
    normalized, so flat masks and the image mean are preserved."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    m = check_frame(mask, "mask")
    if m.ndim != 2:
        raise FrameError("mask must be single channel")
    out = ndimage.gaussian_filter(m, sigma=sigma, mode="reflect")
    return np.clip(out, 0.0, 1.0)


def extract_coarse(mask, frame):
    """Coarse smoke: per-pixel product of the smoothed mask and the frame."""
    m = check_frame(mask, "mask")
    f = check_frame(frame, "frame")
    _match(m, f, "mask", "frame")
    return _broadcast_mask(m, f) * f


def blend_with_transmission(background, transmission, added_light):
    """background * T + added_light, clamped to [0,1]; the single code path
    behind both haze compositing and render-over-background."""
    return np.clip(background * transmission + added_light, 0.0, 1.0)


def composite_haze(clean_bg, smoke, atmospheric):
    """Forward haze model: I = clean * (1 - S) + A * S with the coarse
    transmission T = 1 - S. A is a scalar or per-channel vector in [0,1]."""
    bg = check_frame(clean_bg, "clean_bg")
    s = check_frame(smoke, "smoke")
    _match(bg, s, "clean_bg", "smoke")
    A = np.asarray(atmospheric, dtype=np.float64)
    if A.min() < 0 or A.max() > 1:
        raise ValueError("atmospheric light must lie in [0,1]")
    s = _broadcast_mask(s, bg)
    return blend_with_transmission(bg, 1.0 - s, A * s)


def dark_channel(frame, patch=DARK_CHANNEL_PATCH):
    """Per-pixel channel minimum followed by a patch minimum filter."""
    f = check_frame(frame, "frame")
    if patch < 1 or patch % 2 == 0:
        raise ValueError("patch size must be an odd positive integer")
    mins = f.min(axis=2) if f.ndim == 3 else f
    return ndimage.minimum_filter(mins, size=patch, mode="reflect")


def estimate_atmospheric_light(frame, patch=DARK_CHANNEL_PATCH,
                               top_fraction=DARK_CHANNEL_TOP_FRACTION):
    """Dark-channel-prior estimate of the atmospheric light: take the
    brightest top_fraction of dark-channel pixels and return the
    per-channel maximum frame intensity over that candidate set."""
    f = check_frame(frame, "frame")
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must be in (0,1]")
    dc = dark_channel(f, patch)
    n = dc.size
    k = max(1, int(math.floor(n * top_fraction)))
    flat = dc.reshape(n)
    candidates = np.argpartition(-flat, k - 1)[:k]
    pix = f.reshape(n, -1)[candidates]
    A = pix.max(axis=0)
    return float(A[0]) if A.size == 1 else A


def extract_clean_smoke(frame, recovered_bg, atmospheric,
                        denom_floor=DENOM_FLOOR, fallback=None):
    """Invert the haze model: S = 1 - (I - A) / (bg - A), clamped to [0,1].

    Pixels where |bg - A| < denom_floor are singular; they take the
    fallback frame's value (0 if none is given). Returns (smoke,
    floor_mask) so callers can report the affected pixel count."""
    f = check_frame(frame, "frame")
    bg = check_frame(recovered_bg, "recovered_bg")
    _match(f, bg, "frame", "recovered_bg")
    if f.shape != bg.shape:
        raise FrameError("frame and recovered_bg channel counts differ")
    A = np.asarray(atmospheric, dtype=np.float64)
    denom = bg - A
    floor_mask = np.abs(denom) < denom_floor
    safe = np.where(floor_mask, 1.0, denom)
    smoke = np.clip(1.0 - (f - A) / safe, 0.0, 1.0)
    if fallback is not None:
        fb = check_frame(fallback, "fallback")
        _match(f, fb, "frame", "fallback")
        smoke = np.where(floor_mask, fb, smoke)
    else:
        smoke = np.where(floor_mask, 0.0, smoke)
    return smoke, floor_mask


@dataclass
class WeightSchedule:
    w_min: float = 0.0
    k: float = 0.02
    t0: int = 0

    def __post_init__(self):
        if not 0.0 <= self.w_min <= 1.0:
            raise ValueError("w_min must lie in [0,1]")
        if self.k < 0:
            raise ValueError("decay rate k must be non-negative")


def decay_weight(schedule, t):
    """w(t) = w_min + (1 - w_min) * exp(-k (t - t0)); 1 at t0, decaying to
    w_min. Down-weights later generated frames during particle training."""
    if t < schedule.t0:
        raise ValueError(f"t={t} precedes schedule start t0={schedule.t0}")
    return schedule.w_min + (1.0 - schedule.w_min) * math.exp(-schedule.k * (t - schedule.t0))


def frequency_loss(pred, target, iteration, warmup, lam=0.001, wrap_phase=False):
    """Mean absolute amplitude difference plus mean absolute phase
    difference of the per-channel 2D DFTs, scaled by lam and a linear
    warm-up min(1, iteration/warmup).

    Phase differences compare principal-value angles directly; wrap_phase
    measures them on the circle instead (off by default)."""
    p = check_frame(pred, "pred")
    t = check_frame(target, "target")
    if p.shape != t.shape:
        raise FrameError(f"pred {p.shape} and target {t.shape} shapes differ")
    if p.ndim == 2:
        p = p[:, :, None]
        t = t[:, :, None]
    fp = np.fft.fft2(p, axes=(0, 1))
    ft = np.fft.fft2(t, axes=(0, 1))
    amp = np.abs(np.abs(fp) - np.abs(ft)).mean()
    dphase = np.angle(fp) - np.angle(ft)
    if wrap_phase:
        dphase = np.angle(np.exp(1j * dphase))
    loss = amp + np.abs(dphase).mean()
    if warmup > 0:
        weight = min(1.0, iteration / warmup)
    else:
        weight = 1.0
    return lam * weight * float(loss)
