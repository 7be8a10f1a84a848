"""Pure-numpy kernel backend (reference implementation).

Vectorized over grid nodes / rays; the per-particle splat loops stay in
Python but each iteration is a broadcast over the particle's support box.
"""

import numpy as np


def _base_indices(n, g):
    # g must already be clamped to [0, n-1]
    i0 = np.floor(g).astype(np.int64)
    np.clip(i0, 0, max(n - 2, 0), out=i0)
    f = g - i0
    i1 = np.minimum(i0 + 1, n - 1)
    return i0, i1, f


def trilinear(values, ox, oy, oz, icx, icy, icz, xs, ys, zs):
    nx, ny, nz = values.shape
    gx = np.clip((xs - ox) * icx, 0.0, nx - 1.0)
    gy = np.clip((ys - oy) * icy, 0.0, ny - 1.0)
    gz = np.clip((zs - oz) * icz, 0.0, nz - 1.0)
    i0, i1, fx = _base_indices(nx, gx)
    j0, j1, fy = _base_indices(ny, gy)
    k0, k1, fz = _base_indices(nz, gz)

    c00 = values[i0, j0, k0] * (1.0 - fx) + values[i1, j0, k0] * fx
    c10 = values[i0, j1, k0] * (1.0 - fx) + values[i1, j1, k0] * fx
    c01 = values[i0, j0, k1] * (1.0 - fx) + values[i1, j0, k1] * fx
    c11 = values[i0, j1, k1] * (1.0 - fx) + values[i1, j1, k1] * fx
    c0 = c00 * (1.0 - fy) + c10 * fy
    c1 = c01 * (1.0 - fy) + c11 * fy
    return c0 * (1.0 - fz) + c1 * fz


def stencil_minmax(values, ox, oy, oz, icx, icy, icz, xs, ys, zs):
    nx, ny, nz = values.shape
    gx = np.clip((xs - ox) * icx, 0.0, nx - 1.0)
    gy = np.clip((ys - oy) * icy, 0.0, ny - 1.0)
    gz = np.clip((zs - oz) * icz, 0.0, nz - 1.0)
    i0, i1, _ = _base_indices(nx, gx)
    j0, j1, _ = _base_indices(ny, gy)
    k0, k1, _ = _base_indices(nz, gz)

    corners = np.stack([
        values[i0, j0, k0], values[i1, j0, k0],
        values[i0, j1, k0], values[i1, j1, k0],
        values[i0, j0, k1], values[i1, j0, k1],
        values[i0, j1, k1], values[i1, j1, k1],
    ])
    return corners.min(axis=0), corners.max(axis=0)


def _window(center, radius, origin, cell, n):
    lo = int(np.ceil((center - radius - origin) / cell))
    hi = int(np.floor((center + radius - origin) / cell))
    return max(lo, 0), min(hi, n - 1)


def splat_gaussian_sum(out, centers, inv_covs, weights, radii,
                       ox, oy, oz, cx, cy, cz, trunc2):
    """out[i,j,k] += sum_p weights[p] * exp(-m/2) over nodes with
    Mahalanobis m <= trunc2; support windows come from radii (world units)."""
    nx, ny, nz = out.shape
    for p in range(centers.shape[0]):
        w = weights[p]
        if w == 0.0:
            continue
        i0, i1 = _window(centers[p, 0], radii[p, 0], ox, cx, nx)
        j0, j1 = _window(centers[p, 1], radii[p, 1], oy, cy, ny)
        k0, k1 = _window(centers[p, 2], radii[p, 2], oz, cz, nz)
        if i0 > i1 or j0 > j1 or k0 > k1:
            continue
        dx = ox + np.arange(i0, i1 + 1) * cx - centers[p, 0]
        dy = oy + np.arange(j0, j1 + 1) * cy - centers[p, 1]
        dz = oz + np.arange(k0, k1 + 1) * cz - centers[p, 2]
        A = inv_covs[p]
        X = dx[:, None, None]
        Y = dy[None, :, None]
        Z = dz[None, None, :]
        m = (A[0, 0] * X * X + A[1, 1] * Y * Y + A[2, 2] * Z * Z
             + 2.0 * A[0, 1] * X * Y + 2.0 * A[0, 2] * X * Z
             + 2.0 * A[1, 2] * Y * Z)
        contrib = np.where(m <= trunc2, w * np.exp(-0.5 * m), 0.0)
        out[i0:i1 + 1, j0:j1 + 1, k0:k1 + 1] += contrib


def splat_weighted_accum(num, den, centers, vals, is2x, is2y, is2z,
                         rx, ry, rz, ox, oy, oz, cx, cy, cz, trunc2):
    """Accumulate num += k_p * vals[p] and den += k_p with the diagonal
    Gaussian k_p = exp(-(is2x dx^2 + is2y dy^2 + is2z dz^2)/2)."""
    nx, ny, nz = num.shape
    for p in range(centers.shape[0]):
        i0, i1 = _window(centers[p, 0], rx, ox, cx, nx)
        j0, j1 = _window(centers[p, 1], ry, oy, cy, ny)
        k0, k1 = _window(centers[p, 2], rz, oz, cz, nz)
        if i0 > i1 or j0 > j1 or k0 > k1:
            continue
        dx = ox + np.arange(i0, i1 + 1) * cx - centers[p, 0]
        dy = oy + np.arange(j0, j1 + 1) * cy - centers[p, 1]
        dz = oz + np.arange(k0, k1 + 1) * cz - centers[p, 2]
        m = (is2x * dx[:, None, None] ** 2 + is2y * dy[None, :, None] ** 2
             + is2z * dz[None, None, :] ** 2)
        k = np.where(m <= trunc2, np.exp(-0.5 * m), 0.0)
        num[i0:i1 + 1, j0:j1 + 1, k0:k1 + 1] += k * vals[p]
        den[i0:i1 + 1, j0:j1 + 1, k0:k1 + 1] += k


def laplacian(p, openx, openy, openz, ix2, iy2, iz2):
    """L[c] = sum over open faces of (p_neighbor - p_c) / dx^2.

    Face masks are 0/1 floats on the staggered lattices. Open faces on the
    domain boundary read a ghost pressure of 0 (ambient Dirichlet)."""
    out = np.zeros_like(p)

    d = (p[1:, :, :] - p[:-1, :, :]) * openx[1:-1, :, :]
    out[:-1, :, :] += d * ix2
    out[1:, :, :] -= d * ix2
    out[0, :, :] += openx[0, :, :] * (0.0 - p[0, :, :]) * ix2
    out[-1, :, :] += openx[-1, :, :] * (0.0 - p[-1, :, :]) * ix2

    d = (p[:, 1:, :] - p[:, :-1, :]) * openy[:, 1:-1, :]
    out[:, :-1, :] += d * iy2
    out[:, 1:, :] -= d * iy2
    out[:, 0, :] += openy[:, 0, :] * (0.0 - p[:, 0, :]) * iy2
    out[:, -1, :] += openy[:, -1, :] * (0.0 - p[:, -1, :]) * iy2

    d = (p[:, :, 1:] - p[:, :, :-1]) * openz[:, :, 1:-1]
    out[:, :, :-1] += d * iz2
    out[:, :, 1:] -= d * iz2
    out[:, :, 0] += openz[:, :, 0] * (0.0 - p[:, :, 0]) * iz2
    out[:, :, -1] += openz[:, :, -1] * (0.0 - p[:, :, -1]) * iz2

    return out


def ray_integral(values, ox, oy, oz, icx, icy, icz,
                 camx, camy, camz, dirs, t0, t1, nsamp):
    """Fixed-step midpoint integral of max(density, 0) along each ray
    between parameters t0 and t1 (rays with t1 <= t0 integrate to 0)."""
    dt = (t1 - t0) / nsamp
    valid = dt > 0.0
    S = np.zeros(dirs.shape[0])
    for s in range(nsamp):
        t = t0 + (s + 0.5) * dt
        xs = camx + t * dirs[:, 0]
        ys = camy + t * dirs[:, 1]
        zs = camz + t * dirs[:, 2]
        rho = trilinear(values, ox, oy, oz, icx, icy, icz, xs, ys, zs)
        rho = np.maximum(rho, 0.0)
        S += np.where(valid, rho * dt, 0.0)
    return S
