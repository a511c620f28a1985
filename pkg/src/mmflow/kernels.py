"""Kernel backend selection: compiled extension if built, NumPy otherwise.

``perspective_prox_batch`` is the hot inner loop of the path solver; the
Cython build is typically an order of magnitude faster (see
benchmarks/bench_kernels.py).  The generic-mobility prox has no compiled
variant since it calls back into user Python code anyway.
"""

from __future__ import annotations

from . import _kernels_py

try:  # pragma: no cover - exercised only when the extension is built
    from . import _kernels_cy  # type: ignore[attr-defined]

    _impl = _kernels_cy
except ImportError:  # pragma: no cover
    _kernels_cy = None
    _impl = _kernels_py

BACKEND = _impl.BACKEND

perspective_prox_batch = _impl.perspective_prox_batch
perspective_prox_batch_generic = _kernels_py.perspective_prox_batch_generic


def available_backends() -> dict:
    """Name -> module for every importable kernel backend."""
    out = {"python": _kernels_py}
    if _kernels_cy is not None:
        out["cython"] = _kernels_cy
    return out
