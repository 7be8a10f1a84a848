"""Grayscale emission-absorption rendering of density grids.

Rays march the trilinearly sampled density with a fixed step between the
ray/bbox intersection interval. Emission is proportional to absorption
(constant source radiance), so a pixel is

    (emission/absorption) * (1 - T) + T * background,  T = exp(-absorption * integral(rho))

which is monotone in density, saturates for optically thick media, and
reduces to emission * integral(rho) in the optically thin limit. This is a
visualization/metrics renderer; it is deterministic by construction.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .camera import CONVENTION_SPLAT, PoseError
from .haze import blend_with_transmission


@dataclass
class RenderSettings:
    width: int = 256
    height: int = 256
    samples_per_ray: int = 128
    absorption: float = 0.1
    emission: float = 0.1
    background: float = 0.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")
        if self.samples_per_ray < 2:
            raise ValueError("samples_per_ray must be at least 2")
        if self.absorption <= 0:
            raise ValueError("absorption coefficient must be positive")
        if self.emission < 0:
            raise ValueError("emission scale must be non-negative")
        if not 0.0 <= self.background <= 1.0:
            raise ValueError("background value must lie in [0,1]")


def camera_rays(pose, intr, width, height):
    """World-space origin and unit ray directions for every pixel
    (row-major). Pixel +x maps to camera +x, pixel +y (downward) to camera
    -y, viewing along camera -z."""
    if pose.convention != CONVENTION_SPLAT:
        raise PoseError("renderer expects a splat-convention pose; "
                        "convert_convention() first")
    sx = intr.width / width
    sy = intr.height / height
    px = (np.arange(width) + 0.5) * sx
    py = (np.arange(height) + 0.5) * sy
    X, Y = np.meshgrid(px, py, indexing="xy")
    d = np.stack([(X - intr.cx) / intr.focal,
                  -(Y - intr.cy) / intr.focal,
                  -np.ones_like(X)], axis=-1).reshape(-1, 3)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    dirs = d @ pose.rotation.T
    return pose.translation.copy(), np.ascontiguousarray(dirs)


def ray_box_interval(origin, dirs, bbox_min, bbox_max):
    """Entry/exit parameters of each ray against the box (slab method);
    entry clamped to 0 so cameras inside the box still march forward."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (bbox_min[None, :] - origin[None, :]) / dirs
        tb = (bbox_max[None, :] - origin[None, :]) / dirs
    near = np.fmin(ta, tb)
    far = np.fmax(ta, tb)
    t0 = np.nanmax(near, axis=1)
    t1 = np.nanmin(far, axis=1)
    return np.maximum(t0, 0.0), t1


def render_density_alpha(grid, pose, intr, settings):
    """Render a density grid; returns (image, alpha) frames in [0,1]
    where alpha = 1 - transmittance."""
    origin, dirs = camera_rays(pose, intr, settings.width, settings.height)
    t0, t1 = ray_box_interval(origin, dirs, grid.bbox_min, grid.bbox_max)
    o = grid.origin
    ic = 1.0 / grid.cell
    S = kernels.ray_integral(grid.values, o[0], o[1], o[2],
                             ic[0], ic[1], ic[2],
                             origin[0], origin[1], origin[2],
                             dirs, np.ascontiguousarray(t0),
                             np.ascontiguousarray(t1),
                             settings.samples_per_ray)
    tau = settings.absorption * S
    alpha = -np.expm1(-tau)
    emitted = (settings.emission / settings.absorption) * alpha
    img = np.clip(emitted + (1.0 - alpha) * settings.background, 0.0, 1.0)
    shape = (settings.height, settings.width)
    return img.reshape(shape), alpha.reshape(shape)


def render_density(grid, pose, intr, settings):
    img, _ = render_density_alpha(grid, pose, intr, settings)
    return img


def composite_onto_background(render, alpha, background):
    """Blend a rendered smoke frame over a real background using the
    render's alpha as the occlusion map: bg * (1 - alpha) + render."""
    r = np.asarray(render, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    bg = np.asarray(background, dtype=np.float64)
    if r.shape[:2] != a.shape[:2] or r.shape[:2] != bg.shape[:2]:
        raise ValueError("render, alpha and background dimensions differ")
    if bg.ndim == 3 and a.ndim == 2:
        a = a[:, :, None]
    if bg.ndim == 3 and r.ndim == 2:
        r = r[:, :, None]
    return blend_with_transmission(bg, 1.0 - a, r)
