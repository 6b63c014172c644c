"""Backend selection for the numeric kernels.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is imported. Set ``CYBERFORECAST_PURE_PYTHON=1`` to force the
fallback (the benchmark and the parity tests do this per call instead, via
:func:`get_backend`).
"""

import importlib
import os

from . import _kernels_py


def get_backend(name=None):
    """Return a kernel module: ``"cython"``, ``"python"`` or best available."""
    if name == "python":
        return _kernels_py
    if name not in (None, "cython"):
        raise ValueError(f"unknown kernel backend {name!r}")
    try:
        return importlib.import_module("cyberforecast._kernels")
    except ImportError:
        if name == "cython":
            raise
        return _kernels_py


if os.environ.get("CYBERFORECAST_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    _impl = get_backend()

BACKEND = _impl.BACKEND
lloyd = _impl.lloyd
farthest_first = _impl.farthest_first
minority_cluster_search = _impl.minority_cluster_search
knn = _impl.knn
auc_sorted = _impl.auc_sorted
