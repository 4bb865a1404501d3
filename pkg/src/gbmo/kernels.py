"""Backend selection for the per-cell kernels.

The compiled extension is used when it imports; set ``GBMO_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("GBMO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _kernels_py


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def mean_oscillation(U, W, p):
    return _impl.mean_oscillation(_c(U), _c(W), float(p))


def directional_oscillation(U, W, S, p):
    return _impl.directional_oscillation(_c(U), _c(W), _c(S), float(p))


def pair_oscillation(U, W, p):
    return _impl.pair_oscillation(_c(U), _c(W), float(p))


def linear_inf(V, M, W, p, mu, tol, max_iters):
    return _impl.linear_inf(_c(V), _c(M), _c(W), float(p), float(mu), float(tol), int(max_iters))


VALUE_FLOOR = _kernels_py.VALUE_FLOOR

__all__ = [
    "BACKEND",
    "mean_oscillation",
    "directional_oscillation",
    "pair_oscillation",
    "linear_inf",
]
