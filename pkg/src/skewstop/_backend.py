"""Kernel backend selection.

Hot loops are compiled with numba unless ``SKEWSTOP_BACKEND=numpy`` is set in the
environment (or numba cannot be imported), in which case vectorized numpy
implementations are used instead.  Both backends consume the same counter-based
random streams: stopped positions agree exactly, discount weights up to the last
bit or so (libm and numpy round exp/cosh differently).
"""

from __future__ import annotations

import os

_requested = os.environ.get("SKEWSTOP_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"SKEWSTOP_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if (_requested == "numba" and HAVE_NUMBA) else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    Compilation is attempted whenever numba is installed, independent of BACKEND,
    so the benchmark can compare both paths in a single process.
    """
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
