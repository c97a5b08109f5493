"""Optional numba acceleration for hot lattice kernels.

The pure-numpy implementations are always available; when numba is
installed the loop kernels are compiled with ``@njit``.  Set the
environment variable ``MLAB_NUMBA=0`` to force the numpy path even when
numba is present (useful for debugging and for the kernel benchmark).
Both paths execute the same arithmetic in the same order, so results
are bit-identical.
"""

import os

try:
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if len(args) == 1 and callable(args[0]):
            return args[0]
        return wrap


def jit_enabled() -> bool:
    """True when the numba path is active for this process."""
    return HAS_NUMBA and os.environ.get("MLAB_NUMBA", "1") != "0"
