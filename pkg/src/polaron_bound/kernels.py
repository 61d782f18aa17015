"""Backend selection for the special-function tables.

The compiled extension is used when it was built; otherwise the numpy
implementation is imported.  Setting ``POLARON_BOUND_PURE=1`` forces the
numpy path (used by the benchmark and the backend-agreement tests).
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("POLARON_BOUND_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def _impl(backend: str | None):
    if backend is None:
        backend = BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    if backend == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {backend!r}")


def spherical_jn_table(x, lmax: int, backend: str | None = None) -> np.ndarray:
    """Table of ``j_l(x)`` with shape ``(lmax + 1, x.size)``."""
    x = np.ascontiguousarray(np.ravel(x), dtype=np.float64)
    if lmax < 0:
        raise ValueError("lmax must be non-negative")
    return np.asarray(_impl(backend).spherical_jn_table(x, int(lmax)))


def legendre_q_table(chi, lmax: int, backend: str | None = None) -> np.ndarray:
    """Table of ``Q_l(chi)`` for ``chi > 1`` with shape ``(lmax + 1, chi.size)``."""
    chi = np.ascontiguousarray(np.ravel(chi), dtype=np.float64)
    if lmax < 0:
        raise ValueError("lmax must be non-negative")
    if chi.size and not np.all(chi > 1.0):
        raise ValueError("legendre_q_table needs chi > 1")
    return np.asarray(_impl(backend).legendre_q_table(chi, int(lmax)))
