"""Numba switch.

Set ``GEONARROW_NO_NUMBA=1`` to force the pure-numpy code paths. The flag is
read once at import time.
"""

import os

DISABLED = os.environ.get("GEONARROW_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
