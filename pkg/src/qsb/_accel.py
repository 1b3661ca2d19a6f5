"""Numba acceleration switch.

Hot kernels (tree growing/prediction in :mod:`qsb.forest`) are written in
nopython-compatible NumPy and decorated with :func:`njit`.  When numba is
unavailable, or when the environment variable ``QSB_NO_NUMBA`` (or numba's
own ``NUMBA_DISABLE_JIT``) is set to a non-zero value, the same source runs
as plain Python/NumPy.  Both paths produce bitwise-identical results; see
``benchmarks/bench_kernels.py`` for a speed comparison.

The switch is evaluated once at import time.
"""

import os


def _flag_set(name: str) -> bool:
    return os.environ.get(name, "").strip() not in ("", "0")


def _detect() -> bool:
    if _flag_set("QSB_NO_NUMBA") or _flag_set("NUMBA_DISABLE_JIT"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _detect()

if NUMBA_ENABLED:
    from numba import njit
else:

    def njit(*args, **kwargs):
        """No-op decorator standing in for numba.njit."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
