"""Numba switch.

Set ``ELMMKIT_DISABLE_NUMBA=1`` to run every hot kernel through its
pure-numpy implementation instead of the jitted one. The choice can also be
changed at runtime with :func:`set_backend` (used by the tests and the
benchmark to compare both paths).
"""

import contextlib
import os
import warnings

warnings.filterwarnings("ignore", message="The TBB threading layer")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

# fastmath stays off: reassociation would break run-to-run reproducibility.
NJIT_KWARGS = {"nogil": True, "fastmath": False, "cache": True}

_disabled = os.environ.get("ELMMKIT_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")
_backend = "numba" if (HAVE_NUMBA and not _disabled) else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with the package defaults; identity if numba is missing."""
    opts = dict(NJIT_KWARGS)
    opts.update(kwargs)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    if args and callable(args[0]):
        return numba.njit(**opts)(args[0])
    return numba.njit(**opts)


def get_backend():
    return _backend


def set_backend(name):
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextlib.contextmanager
def backend(name):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def set_threads(n):
    """Set the numba thread count (clipped to what the runtime allows)."""
    if not HAVE_NUMBA or n is None:
        return
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
