"""Kernel backend selection.

The hot loops (Gaussian matrix-element rows, radial Riccati sweeps, angular
moment quadrature) exist in two flavours: a numba ``@njit`` version and a
pure-numpy one.  Set ``COULTHRESH_BACKEND=numpy`` to force the fallback; the
default is numba when it imports cleanly.
"""
import os

_requested = os.environ.get("COULTHRESH_BACKEND", "numba").strip().lower()

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _requested != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(fn):
    """``numba.njit(cache=True)`` when numba is available, identity otherwise."""
    if not HAVE_NUMBA:
        return fn
    from numba import njit as _njit

    return _njit(cache=True)(fn)


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
