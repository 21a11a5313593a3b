"""Kernel backend selection: compiled ``_kernels`` when built, else ``_kernels_py``."""

from __future__ import annotations

import os

from . import _kernels_py

try:
    if os.environ.get("BAYESCP_PURE_PYTHON") == "1":
        raise ImportError("compiled kernels disabled by BAYESCP_PURE_PYTHON")
    from . import _kernels as _impl
except ImportError:
    _impl = _kernels_py

BACKEND: str = _impl.BACKEND
ExactKernel = _impl.ExactKernel
GridKernel = _impl.GridKernel
DiscountedKernel = _impl.DiscountedKernel
regret_curve = _impl.regret_curve
grid_index = _kernels_py.grid_index
grid_value = _kernels_py.grid_value


def available_backends() -> dict:
    """Map backend name to module for every importable backend."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        out["cython"] = _kernels
    return out
