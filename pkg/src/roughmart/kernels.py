"""Kernel dispatch: compiled extension when available, NumPy fallback otherwise.

Set the environment variable ``ROUGHMART_NO_SPEEDUPS=1`` before import to
force the fallback (used by the benchmark and the backend-equivalence tests).
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("ROUGHMART_NO_SPEEDUPS"):
    _impl = _kernels_py
    HAVE_COMPILED = False
else:
    try:
        from . import _speedups as _impl

        HAVE_COMPILED = True
    except ImportError:
        _impl = _kernels_py
        HAVE_COMPILED = False

BACKEND = "compiled" if HAVE_COMPILED else "numpy"


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def pvar_sum_scalar(x, p):
    """Max over strict index chains of sum of |x[u_l]-x[u_{l-1}]|^p."""
    return _impl.pvar_sum_scalar(_c(x), float(p))


def pvar_sum_vector(x, p):
    return _impl.pvar_sum_vector(_c(x), float(p))


def pvar_sum_matrix(a, p):
    """Chains scored by nonnegative entry magnitudes a[i, j], i < j."""
    return _impl.pvar_sum_matrix(_c(a), float(p))


def pinf_scalar(x):
    # sup |x_j - x_i| over pairs is range of the values
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] <= 1:
        return 0.0
    return float(x.max() - x.min())


def pinf_vector(x):
    return _impl.pinf_vector(_c(x))


def pinf_matrix(a):
    return _impl.pinf_matrix(_c(a))


def paraproduct_field(f, dg):
    """Dense field of left-point sums: out[s,t] = sum_{s<=j<t} f[s,j] dg[j]."""
    f = _c(f)
    dg = _c(dg)
    out = np.zeros_like(f)
    _impl.paraproduct_field(f, dg, out)
    return out
