"""Optional numba acceleration.

Set ``QUADRECON_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. for
debugging or on platforms without a working numba install.
"""
import os
import warnings

_DISABLED = os.environ.get("QUADRECON_DISABLE_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError("disabled by QUADRECON_DISABLE_NUMBA")
    from numba import njit
    HAVE_NUMBA = True
except ImportError as exc:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False
    if not _DISABLED:
        warnings.warn(f"numba unavailable ({exc}); using numpy kernels")

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func
        return decorator


def use_numba():
    return HAVE_NUMBA
