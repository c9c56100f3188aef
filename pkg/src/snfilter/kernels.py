"""Backend selection for the hot recursion kernel.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``SNFILTER_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py.spsa_fold

if os.environ.get("SNFILTER_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        _impl = _compiled.spsa_fold


def available_backends():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        pass
    else:
        names.append("cython")
    return names


def get_fold(backend=None):
    """Return the fold function for `backend` (default: the selected one)."""
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py.spsa_fold
    if backend == "cython":
        from . import _kernels

        return _kernels.spsa_fold
    raise ValueError(f"unknown kernel backend {backend!r}")


def spsa_fold(theta0, intensities, means, dispersions, currents, start_iteration, control_idx, backend=None):
    """Apply the recursion for every row of `currents`, in order.

    Returns the final per-bin estimate and a ``(n_scans, n_control)`` array
    holding the estimate at `control_idx` after every step. Inputs are
    assumed validated by the caller.
    """
    fold = get_fold(backend)
    return fold(
        np.ascontiguousarray(theta0, dtype=np.float64),
        np.ascontiguousarray(intensities, dtype=np.float64),
        np.ascontiguousarray(means, dtype=np.float64),
        np.ascontiguousarray(dispersions, dtype=np.float64),
        np.ascontiguousarray(currents, dtype=np.float64),
        int(start_iteration),
        np.ascontiguousarray(control_idx, dtype=np.intp),
    )
