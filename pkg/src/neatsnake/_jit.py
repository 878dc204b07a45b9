"""Optional numba acceleration.

Hot numeric kernels (physics substeps, ray casting, network evaluation) are
written as plain array code and decorated with ``njit`` when numba is
importable. Without numba everything still runs, just slowly.
"""

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap
