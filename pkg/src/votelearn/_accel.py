"""Backend selection for the hot kernels.

Numba-compiled kernels are used when numba imports cleanly and the
environment variable ``VOTELEARN_DISABLE_NUMBA`` is unset (or ``0``).
Otherwise every kernel falls back to its vectorised numpy twin.
"""
import os

DISABLE_ENV = "VOTELEARN_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(fn):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    Compilation is lazy, so decorating never costs anything when the numpy
    backend is selected.
    """
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
