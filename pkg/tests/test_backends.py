"""The numba kernels must agree with the pure-numpy reference."""

import numpy as np
import pytest

from smokeforge.kernels import numpy_impl

numba_impl = pytest.importorskip("smokeforge.kernels.numba_impl")


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(42)


def lattice_args(shape=(12, 10, 14)):
    values = np.random.default_rng(1).normal(size=shape)
    return values, 0.5, -1.0, 2.0, 1.0 / 0.7, 1.0 / 1.1, 1.0 / 0.9


def test_trilinear(rng):
    values, ox, oy, oz, icx, icy, icz = lattice_args()
    xs = rng.uniform(-3, 12, 500)
    ys = rng.uniform(-3, 12, 500)
    zs = rng.uniform(-3, 12, 500)
    a = numpy_impl.trilinear(values, ox, oy, oz, icx, icy, icz, xs, ys, zs)
    b = numba_impl.trilinear(values, ox, oy, oz, icx, icy, icz, xs, ys, zs)
    assert np.allclose(a, b, atol=1e-13, rtol=0)


def test_stencil_minmax(rng):
    values, ox, oy, oz, icx, icy, icz = lattice_args()
    xs = rng.uniform(-3, 12, 300)
    ys = rng.uniform(-3, 12, 300)
    zs = rng.uniform(-3, 12, 300)
    amn, amx = numpy_impl.stencil_minmax(values, ox, oy, oz, icx, icy, icz, xs, ys, zs)
    bmn, bmx = numba_impl.stencil_minmax(values, ox, oy, oz, icx, icy, icz, xs, ys, zs)
    assert np.array_equal(amn, bmn)
    assert np.array_equal(amx, bmx)


def test_splat_gaussian_sum(rng):
    n = 15
    centers = rng.uniform(0, 10, (n, 3))
    scales = rng.uniform(0.4, 1.5, (n, 3))
    inv_covs = np.stack([np.diag(1.0 / s ** 2) for s in scales])
    weights = rng.uniform(0, 1, n)
    radii = 6.5 * scales
    a = np.zeros((16, 16, 16))
    b = np.zeros((16, 16, 16))
    args = (centers, inv_covs, weights, radii, 0.3, 0.3, 0.3, 0.62, 0.62, 0.62,
            6.5 ** 2)
    numpy_impl.splat_gaussian_sum(a, *args)
    numba_impl.splat_gaussian_sum(b, *args)
    assert np.allclose(a, b, atol=1e-13, rtol=0)


def test_splat_weighted_accum(rng):
    n = 12
    centers = rng.uniform(0, 10, (n, 3))
    vals = rng.normal(size=n)
    a_num, a_den = np.zeros((14, 14, 14)), np.zeros((14, 14, 14))
    b_num, b_den = np.zeros((14, 14, 14)), np.zeros((14, 14, 14))
    args = (centers, vals, 1.0 / 1.5 ** 2, 1.0 / 1.5 ** 2, 1.0 / 1.5 ** 2,
            6.5 * 1.5, 6.5 * 1.5, 6.5 * 1.5, 0.0, 0.35, 0.35, 0.7, 0.7, 0.7,
            6.5 ** 2)
    numpy_impl.splat_weighted_accum(a_num, a_den, *args)
    numba_impl.splat_weighted_accum(b_num, b_den, *args)
    assert np.allclose(a_num, b_num, atol=1e-13, rtol=0)
    assert np.allclose(a_den, b_den, atol=1e-13, rtol=0)


def test_laplacian(rng):
    shape = (10, 11, 9)
    p = rng.normal(size=shape)
    openx = (rng.uniform(size=(11, 11, 9)) > 0.2).astype(np.float64)
    openy = (rng.uniform(size=(10, 12, 9)) > 0.2).astype(np.float64)
    openz = (rng.uniform(size=(10, 11, 10)) > 0.2).astype(np.float64)
    a = numpy_impl.laplacian(p, openx, openy, openz, 1.1, 0.9, 1.3)
    b = numba_impl.laplacian(p, openx, openy, openz, 1.1, 0.9, 1.3)
    assert np.allclose(a, b, atol=1e-12, rtol=0)


def test_ray_integral(rng):
    values = rng.uniform(0, 1, (12, 12, 12))
    nrays = 64
    dirs = rng.normal(size=(nrays, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    t0 = rng.uniform(0, 2, nrays)
    t1 = t0 + rng.uniform(-0.5, 6, nrays)  # some rays degenerate
    args = (values, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0, 6.0, 6.0, 20.0,
            dirs, t0, t1, 32)
    a = numpy_impl.ray_integral(*args)
    b = numba_impl.ray_integral(*args)
    assert np.allclose(a, b, atol=1e-12, rtol=0)
