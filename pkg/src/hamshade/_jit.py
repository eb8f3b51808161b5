"""Numba switch.

Set ``HAMSHADE_NO_JIT=1`` to run every kernel as plain Python/NumPy. The
kernels are written so both paths execute the same source.
"""
import os

DISABLED = os.environ.get("HAMSHADE_NO_JIT", "").strip().lower() in ("1", "true", "yes")

if DISABLED:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn
        return wrap
else:
    from numba import njit as _numba_njit

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return _numba_njit(*args, **kwargs)


def backend():
    return "python" if DISABLED else "numba"
