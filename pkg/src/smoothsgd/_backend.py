"""Kernel backend selection.

The compiled ``_kernels`` module is used when it imports; otherwise the
numpy implementation in ``_kernels_py``. Set ``SMOOTHSGD_BACKEND=python``
to force the fallback.
"""
import os

from . import _kernels_py

kernels = _kernels_py
if os.environ.get("SMOOTHSGD_BACKEND", "").lower() not in ("python", "py", "numpy"):
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        pass

BACKEND = kernels.BACKEND


def available_backends():
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        return out
    out["cython"] = _kernels
    return out
