"""Backend selection for the hot simulation kernels.

The kernels in :mod:`rpipe.kernels` are written in a numba-compatible subset
of Python over numpy arrays.  With numba installed they are JIT-compiled;
without it (or when forced) the very same functions run as plain Python.

Selection is controlled by the ``RPIPE_BACKEND`` environment variable:

  auto    (default) use numba when importable, else fall back to Python
  numba   require numba; raise if it cannot be imported
  python  force the pure-Python path even if numba is installed
"""

import os

_CHOICE = os.environ.get("RPIPE_BACKEND", "auto").strip().lower()
if _CHOICE not in ("auto", "numba", "python"):
    raise RuntimeError(
        "RPIPE_BACKEND must be one of auto|numba|python, got %r" % _CHOICE
    )

NUMBA_ENABLED = False
if _CHOICE in ("auto", "numba"):
    try:
        from numba import njit as _numba_njit

        NUMBA_ENABLED = True
    except ImportError:
        if _CHOICE == "numba":
            raise


if NUMBA_ENABLED:

    def njit(func):
        """JIT-compile a kernel (disk-cached between sessions)."""
        return _numba_njit(cache=True)(func)

else:

    def njit(func):
        """Identity decorator: run the kernel as plain Python."""
        return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "python"
