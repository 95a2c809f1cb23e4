"""Select the Gram-Schmidt walk kernel at import time.

The compiled extension is used when it was built; otherwise the numpy kernel.
Setting ``RCTNET_PURE_PYTHON=1`` forces the numpy kernel.
"""

from __future__ import annotations

import os

import numpy as np

from . import _gsw_py

try:
    if os.environ.get("RCTNET_PURE_PYTHON") == "1":
        raise ImportError("pure-python backend requested")
    from . import _gsw_ext
except ImportError:
    _gsw_ext = None

BACKEND = "cython" if _gsw_ext is not None else "numpy"
AVAILABLE = ("cython", "numpy") if _gsw_ext is not None else ("numpy",)


def gsw_walk(
    xs: np.ndarray, phi: float, eps: float, uniforms: np.ndarray, backend: str | None = None
) -> np.ndarray:
    name = backend or BACKEND
    if name == "cython":
        if _gsw_ext is None:
            raise RuntimeError("compiled kernel not built; reinstall with Cython available")
        return _gsw_ext.gsw_walk(xs, phi, eps, uniforms)
    if name == "numpy":
        return _gsw_py.gsw_walk(xs, phi, eps, uniforms)
    raise ValueError(f"unknown backend {name!r}")
