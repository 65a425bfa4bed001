"""Backend selection for the hot kernels.

Two implementations of the compute-heavy inner loops are shipped: a numba
``@njit`` path and a vectorized pure-NumPy path.  The environment variable
``GUIDEDWAVES_BACKEND`` picks one:

* ``auto`` (default): numba when it imports, NumPy otherwise,
* ``numba``: require numba, raise if unavailable,
* ``numpy``: force the fallback even when numba is installed.

Both paths produce results that agree to rounding; ``benchmarks/`` times
them against each other.
"""

import os

_requested = os.environ.get("GUIDEDWAVES_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"GUIDEDWAVES_BACKEND={_requested!r}: expected 'auto', 'numba' or 'numpy'"
    )

HAVE_NUMBA = False
if _requested in ("auto", "numba"):
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise

USE_NUMBA = HAVE_NUMBA and _requested != "numpy"

default_numba_kwargs = {"nopython": True, "cache": True, "fastmath": False}


def njit(**kwargs):
    """Return numba.njit configured for this package, or a no-op decorator."""
    if USE_NUMBA:
        import numba

        opts = dict(default_numba_kwargs)
        opts.update(kwargs)
        return numba.jit(**opts)

    def passthrough(func):
        return func

    return passthrough


def set_num_threads(n):
    """Set the numba thread count; silently ignored on the NumPy path."""
    if USE_NUMBA:
        import numba

        numba.set_num_threads(int(n))


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
