# Compiled kernels for the O(N^2) inner loops: the p-variation dynamic
# program over chains and the dense paraproduct accumulation.

from libc.math cimport fabs, pow, sqrt, INFINITY


def pvar_sum_scalar(double[::1] x, double p):
    """Max over strict index chains of sum |x[u_l] - x[u_{l-1}]|^p."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j
    cdef double best, v, d
    cdef double[::1] run
    import numpy as np
    run_arr = np.zeros(n, dtype=np.float64)
    run = run_arr
    if n <= 1:
        return 0.0
    cdef bint p_is_two = (p == 2.0)
    cdef bint p_is_one = (p == 1.0)
    for j in range(1, n):
        best = 0.0
        for i in range(j):
            d = fabs(x[j] - x[i])
            if p_is_two:
                v = run[i] + d * d
            elif p_is_one:
                v = run[i] + d
            else:
                v = run[i] + pow(d, p)
            if v > best:
                best = v
        run[j] = best
    return run[n - 1]


def pvar_sum_vector(double[:, ::1] x, double p):
    """Same DP with Euclidean distances between rows of x."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d_dim = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double best, v, acc, diff
    import numpy as np
    run_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] run = run_arr
    if n <= 1:
        return 0.0
    cdef bint p_is_two = (p == 2.0)
    for j in range(1, n):
        best = 0.0
        for i in range(j):
            acc = 0.0
            for k in range(d_dim):
                diff = x[j, k] - x[i, k]
                acc += diff * diff
            if p_is_two:
                v = run[i] + acc
            else:
                v = run[i] + pow(sqrt(acc), p)
            if v > best:
                best = v
        run[j] = best
    return run[n - 1]


def pvar_sum_matrix(double[:, ::1] a, double p):
    """DP over chains with chain values a[i, j] (entry magnitudes), i < j."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j
    cdef double best, v
    import numpy as np
    run_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] run = run_arr
    if n <= 1:
        return 0.0
    cdef bint p_is_two = (p == 2.0)
    cdef bint p_is_one = (p == 1.0)
    for j in range(1, n):
        best = 0.0
        for i in range(j):
            if p_is_two:
                v = run[i] + a[i, j] * a[i, j]
            elif p_is_one:
                v = run[i] + a[i, j]
            else:
                v = run[i] + pow(a[i, j], p)
            if v > best:
                best = v
        run[j] = best
    return run[n - 1]


def pinf_vector(double[:, ::1] x):
    """Max Euclidean distance over row pairs i < j."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d_dim = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double best = 0.0, acc, diff
    for j in range(1, n):
        for i in range(j):
            acc = 0.0
            for k in range(d_dim):
                diff = x[j, k] - x[i, k]
                acc += diff * diff
            if acc > best:
                best = acc
    return sqrt(best)


def pinf_matrix(double[:, ::1] a):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j
    cdef double best = 0.0
    for j in range(1, n):
        for i in range(j):
            if a[i, j] > best:
                best = a[i, j]
    return best


def paraproduct_field(double[:, ::1] f, double[::1] dg, double[:, ::1] out):
    """out[s, t] = sum_{s <= j < t} f[s, j] * dg[j] for all 0 <= s <= t <= N."""
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t s, t
    cdef double acc
    for s in range(n):
        acc = 0.0
        out[s, s] = 0.0
        for t in range(s + 1, n):
            acc += f[s, t - 1] * dg[t - 1]
            out[s, t] = acc
    return None
