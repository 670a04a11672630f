"""Hot loops, compiled when available.

The Cython extension is preferred; set ``SUPROUND_PURE_PYTHON=1`` to force
the numpy fallback. ``BACKEND`` names the active implementation.
"""

import importlib
import os

__all__ = ["BACKEND", "load_backend", "pair_bucket_max", "axis_bucket_max",
           "compensated_marginals"]


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "cython":
        return importlib.import_module("supround._kernels._ckernels")
    if name == "python":
        return importlib.import_module("supround._kernels._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


if os.environ.get("SUPROUND_PURE_PYTHON", "") not in ("", "0"):
    _impl = load_backend("python")
    BACKEND = "python"
else:
    try:
        _impl = load_backend("cython")
        BACKEND = "cython"
    except ImportError:
        _impl = load_backend("python")
        BACKEND = "python"

pair_bucket_max = _impl.pair_bucket_max
axis_bucket_max = _impl.axis_bucket_max
compensated_marginals = _impl.compensated_marginals
