"""Numba kernel backend. Serial @njit loops: keeps results bitwise
reproducible regardless of thread count (no prange reductions)."""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _sample(values, ox, oy, oz, icx, icy, icz, x, y, z):
    nx, ny, nz = values.shape
    gx = (x - ox) * icx
    if gx < 0.0:
        gx = 0.0
    elif gx > nx - 1.0:
        gx = nx - 1.0
    gy = (y - oy) * icy
    if gy < 0.0:
        gy = 0.0
    elif gy > ny - 1.0:
        gy = ny - 1.0
    gz = (z - oz) * icz
    if gz < 0.0:
        gz = 0.0
    elif gz > nz - 1.0:
        gz = nz - 1.0

    i0 = int(gx)
    if i0 > nx - 2:
        i0 = nx - 2
    if i0 < 0:
        i0 = 0
    j0 = int(gy)
    if j0 > ny - 2:
        j0 = ny - 2
    if j0 < 0:
        j0 = 0
    k0 = int(gz)
    if k0 > nz - 2:
        k0 = nz - 2
    if k0 < 0:
        k0 = 0
    i1 = min(i0 + 1, nx - 1)
    j1 = min(j0 + 1, ny - 1)
    k1 = min(k0 + 1, nz - 1)
    fx = gx - i0
    fy = gy - j0
    fz = gz - k0

    c00 = values[i0, j0, k0] * (1.0 - fx) + values[i1, j0, k0] * fx
    c10 = values[i0, j1, k0] * (1.0 - fx) + values[i1, j1, k0] * fx
    c01 = values[i0, j0, k1] * (1.0 - fx) + values[i1, j0, k1] * fx
    c11 = values[i0, j1, k1] * (1.0 - fx) + values[i1, j1, k1] * fx
    c0 = c00 * (1.0 - fy) + c10 * fy
    c1 = c01 * (1.0 - fy) + c11 * fy
    return c0 * (1.0 - fz) + c1 * fz


@njit(cache=True)
def trilinear(values, ox, oy, oz, icx, icy, icz, xs, ys, zs):
    n = xs.shape[0]
    out = np.empty(n)
    for r in range(n):
        out[r] = _sample(values, ox, oy, oz, icx, icy, icz,
                         xs[r], ys[r], zs[r])
    return out


@njit(cache=True)
def stencil_minmax(values, ox, oy, oz, icx, icy, icz, xs, ys, zs):
    nx, ny, nz = values.shape
    n = xs.shape[0]
    mn = np.empty(n)
    mx = np.empty(n)
    for r in range(n):
        gx = (xs[r] - ox) * icx
        if gx < 0.0:
            gx = 0.0
        elif gx > nx - 1.0:
            gx = nx - 1.0
        gy = (ys[r] - oy) * icy
        if gy < 0.0:
            gy = 0.0
        elif gy > ny - 1.0:
            gy = ny - 1.0
        gz = (zs[r] - oz) * icz
        if gz < 0.0:
            gz = 0.0
        elif gz > nz - 1.0:
            gz = nz - 1.0
        i0 = min(max(int(gx), 0), max(nx - 2, 0))
        j0 = min(max(int(gy), 0), max(ny - 2, 0))
        k0 = min(max(int(gz), 0), max(nz - 2, 0))
        i1 = min(i0 + 1, nx - 1)
        j1 = min(j0 + 1, ny - 1)
        k1 = min(k0 + 1, nz - 1)
        lo = values[i0, j0, k0]
        hi = lo
        for c in range(1, 8):
            ii = i1 if c & 1 else i0
            jj = j1 if c & 2 else j0
            kk = k1 if c & 4 else k0
            v = values[ii, jj, kk]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        mn[r] = lo
        mx[r] = hi
    return mn, mx


@njit(cache=True, inline="always")
def _window(center, radius, origin, cell, n):
    lo = int(np.ceil((center - radius - origin) / cell))
    hi = int(np.floor((center + radius - origin) / cell))
    if lo < 0:
        lo = 0
    if hi > n - 1:
        hi = n - 1
    return lo, hi


@njit(cache=True)
def splat_gaussian_sum(out, centers, inv_covs, weights, radii,
                       ox, oy, oz, cx, cy, cz, trunc2):
    nx, ny, nz = out.shape
    for p in range(centers.shape[0]):
        w = weights[p]
        if w == 0.0:
            continue
        px = centers[p, 0]
        py = centers[p, 1]
        pz = centers[p, 2]
        i0, i1 = _window(px, radii[p, 0], ox, cx, nx)
        j0, j1 = _window(py, radii[p, 1], oy, cy, ny)
        k0, k1 = _window(pz, radii[p, 2], oz, cz, nz)
        a00 = inv_covs[p, 0, 0]
        a11 = inv_covs[p, 1, 1]
        a22 = inv_covs[p, 2, 2]
        a01 = inv_covs[p, 0, 1]
        a02 = inv_covs[p, 0, 2]
        a12 = inv_covs[p, 1, 2]
        for i in range(i0, i1 + 1):
            dx = ox + i * cx - px
            for j in range(j0, j1 + 1):
                dy = oy + j * cy - py
                for k in range(k0, k1 + 1):
                    dz = oz + k * cz - pz
                    m = (a00 * dx * dx + a11 * dy * dy + a22 * dz * dz
                         + 2.0 * a01 * dx * dy + 2.0 * a02 * dx * dz
                         + 2.0 * a12 * dy * dz)
                    if m <= trunc2:
                        out[i, j, k] += w * np.exp(-0.5 * m)


@njit(cache=True)
def splat_weighted_accum(num, den, centers, vals, is2x, is2y, is2z,
                         rx, ry, rz, ox, oy, oz, cx, cy, cz, trunc2):
    nx, ny, nz = num.shape
    for p in range(centers.shape[0]):
        px = centers[p, 0]
        py = centers[p, 1]
        pz = centers[p, 2]
        i0, i1 = _window(px, rx, ox, cx, nx)
        j0, j1 = _window(py, ry, oy, cy, ny)
        k0, k1 = _window(pz, rz, oz, cz, nz)
        v = vals[p]
        for i in range(i0, i1 + 1):
            dx = ox + i * cx - px
            for j in range(j0, j1 + 1):
                dy = oy + j * cy - py
                for k in range(k0, k1 + 1):
                    dz = oz + k * cz - pz
                    m = is2x * dx * dx + is2y * dy * dy + is2z * dz * dz
                    if m <= trunc2:
                        kv = np.exp(-0.5 * m)
                        num[i, j, k] += kv * v
                        den[i, j, k] += kv


@njit(cache=True)
def laplacian(p, openx, openy, openz, ix2, iy2, iz2):
    nx, ny, nz = p.shape
    out = np.zeros_like(p)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                pc = p[i, j, k]
                acc = 0.0
                if openx[i, j, k] != 0.0:
                    pn = p[i - 1, j, k] if i > 0 else 0.0
                    acc += (pn - pc) * ix2
                if openx[i + 1, j, k] != 0.0:
                    pn = p[i + 1, j, k] if i + 1 < nx else 0.0
                    acc += (pn - pc) * ix2
                if openy[i, j, k] != 0.0:
                    pn = p[i, j - 1, k] if j > 0 else 0.0
                    acc += (pn - pc) * iy2
                if openy[i, j + 1, k] != 0.0:
                    pn = p[i, j + 1, k] if j + 1 < ny else 0.0
                    acc += (pn - pc) * iy2
                if openz[i, j, k] != 0.0:
                    pn = p[i, j, k - 1] if k > 0 else 0.0
                    acc += (pn - pc) * iz2
                if openz[i, j, k + 1] != 0.0:
                    pn = p[i, j, k + 1] if k + 1 < nz else 0.0
                    acc += (pn - pc) * iz2
                out[i, j, k] = acc
    return out


@njit(cache=True)
def ray_integral(values, ox, oy, oz, icx, icy, icz,
                 camx, camy, camz, dirs, t0, t1, nsamp):
    nrays = dirs.shape[0]
    out = np.zeros(nrays)
    for r in range(nrays):
        tt0 = t0[r]
        tt1 = t1[r]
        if tt1 <= tt0:
            continue
        dt = (tt1 - tt0) / nsamp
        acc = 0.0
        for s in range(nsamp):
            t = tt0 + (s + 0.5) * dt
            x = camx + t * dirs[r, 0]
            y = camy + t * dirs[r, 1]
            z = camz + t * dirs[r, 2]
            rho = _sample(values, ox, oy, oz, icx, icy, icz, x, y, z)
            if rho < 0.0:
                rho = 0.0
            acc += rho * dt
        out[r] = acc
    return out
