"""Backend switch for the hot numeric kernels.

The particle->grid splats, semi-Lagrangian gathers, pressure Laplacian and
ray integrator dominate runtime. Each has two implementations with the same
signature: a numba @njit version and a vectorized pure-numpy version.

Set SMOKEFORGE_NUMBA=0 (or "false"/"off") to force the numpy fallback; the
flag is read once at import. When numba is not importable the fallback is
used silently. `benchmarks/bench_kernels.py` times both paths side by side.
"""

import os


def _want_numba() -> bool:
    flag = os.environ.get("SMOKEFORGE_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


NUMBA_REQUESTED = _want_numba()

if NUMBA_REQUESTED:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
