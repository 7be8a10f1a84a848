"""Hot numeric kernels, backed by numba or pure numpy (see smokeforge.accel).

Both backends expose the same functions over plain float64 arrays:

    trilinear            -- clamped trilinear gather from a 3D lattice
    stencil_minmax       -- min/max over the 2x2x2 interpolation stencil
    splat_gaussian_sum   -- accumulate anisotropic Gaussian kernels on a lattice
    splat_weighted_accum -- kernel-weighted numerator/denominator accumulation
    laplacian            -- masked 7-point Laplacian with ghost-zero boundaries
    ray_integral         -- per-ray line integral of trilinear density

A lattice is described by the world position of node (0,0,0) and the node
spacing; cell-centered and face-centered grids are all lattices here.
"""

from .. import accel

if accel.NUMBA_ENABLED:
    from . import numba_impl as impl
else:
    from . import numpy_impl as impl

trilinear = impl.trilinear
stencil_minmax = impl.stencil_minmax
splat_gaussian_sum = impl.splat_gaussian_sum
splat_weighted_accum = impl.splat_weighted_accum
laplacian = impl.laplacian
ray_integral = impl.ray_integral

BACKEND = accel.backend_name()
