"""NumPy fallback for the compiled kernels.

Same contracts as ``_speedups``; selected at import time by ``kernels``
when the extension is unavailable or disabled.
"""

import numpy as np


def pvar_sum_scalar(x, p):
    n = x.shape[0]
    if n <= 1:
        return 0.0
    run = np.zeros(n)
    for j in range(1, n):
        d = np.abs(x[j] - x[:j])
        run[j] = np.max(run[:j] + d**p)
    return float(run[-1])


def pvar_sum_vector(x, p):
    n = x.shape[0]
    if n <= 1:
        return 0.0
    run = np.zeros(n)
    for j in range(1, n):
        d = np.linalg.norm(x[j] - x[:j], axis=1)
        run[j] = np.max(run[:j] + d**p)
    return float(run[-1])


def pvar_sum_matrix(a, p):
    n = a.shape[0]
    if n <= 1:
        return 0.0
    run = np.zeros(n)
    for j in range(1, n):
        run[j] = np.max(run[:j] + a[:j, j] ** p)
    return float(run[-1])


def pinf_vector(x):
    n = x.shape[0]
    best = 0.0
    for j in range(1, n):
        d = np.einsum("id,id->i", x[j] - x[:j], x[j] - x[:j]).max()
        best = max(best, d)
    return float(np.sqrt(best))


def pinf_matrix(a):
    n = a.shape[0]
    if n <= 1:
        return 0.0
    iu = np.triu_indices(n, k=1)
    return float(a[iu].max())


def paraproduct_field(f, dg, out):
    n = out.shape[0]
    terms = f[:, :-1] * dg[np.newaxis, :]
    for s in range(n):
        out[s, s] = 0.0
        if s < n - 1:
            out[s, s + 1 :] = np.cumsum(terms[s, s:])
            out[s, :s] = 0.0
    out[n - 1, : n - 1] = 0.0
