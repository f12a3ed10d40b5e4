"""Select the compiled transfer kernels when available, else the numpy ones.

Set ``PMMATCH_BACKEND=python`` to force the fallback (used by the benchmark
and the backend-equivalence tests).
"""
import os

from . import _kernels_py

BACKEND = "python"
kernels = _kernels_py

if os.environ.get("PMMATCH_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        kernels = _compiled
        BACKEND = "cython"


def get_kernels(name=None):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name is None:
        return kernels
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels as compiled

        return compiled
    raise ValueError(f"unknown backend {name!r}")
