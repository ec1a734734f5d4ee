"""Backend switch for the hot kernels.

Kernels are written once in a numba-compatible subset of Python/numpy.  With
numba available and ``TIERLAB_JIT`` unset (or truthy) they are compiled with
``numba.njit``; with ``TIERLAB_JIT=0`` the very same functions run as plain
Python over numpy arrays.  Both paths use integer picosecond arithmetic and the
same in-house PRNG, so they produce identical results.
"""

import os

_FALSY = {"0", "false", "no", "off"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

JIT_ENABLED = numba is not None and os.environ.get("TIERLAB_JIT", "1").strip().lower() not in _FALSY
BACKEND = "numba" if JIT_ENABLED else "numpy"


def jit(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it untouched."""
    if JIT_ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn
