"""Hot numerical kernels, compiled when available.

The Cython build (``_core``) is preferred; if it is missing, or
``FFLM_PURE_PYTHON=1`` is set, the numpy/pure-Python fallback is used.
``IMPLEMENTATION`` names the active choice.
"""

import os

if os.environ.get("FFLM_PURE_PYTHON", "") in ("", "0"):
    try:
        from fflm._kernels import _core as _impl

        IMPLEMENTATION = "cython"
    except ImportError:
        from fflm._kernels import _fallback as _impl

        IMPLEMENTATION = "python"
else:
    from fflm._kernels import _fallback as _impl

    IMPLEMENTATION = "python"

fnv1a64 = _impl.fnv1a64
sweep_threshold = _impl.sweep_threshold
kendall_counts = _impl.kendall_counts

__all__ = ["IMPLEMENTATION", "fnv1a64", "sweep_threshold", "kendall_counts"]
