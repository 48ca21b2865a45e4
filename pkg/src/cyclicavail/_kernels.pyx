# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for forward/backward and gap path counting.

Mirrors ``_kernels_py`` exactly; see that module for array conventions.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport abs as iabs

cnp.import_array()


def forward(const double[:, :, ::1] trans, const long long[::1] pos,
            const double[:, ::1] emis, const double[::1] init):
    cdef Py_ssize_t T = emis.shape[0], n = emis.shape[1]
    cdef Py_ssize_t t, i, j
    cdef long long x
    cdef double c, acc
    alpha_arr = np.empty((T, n))
    scale_arr = np.empty(T)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[::1] scale = scale_arr
    for t in range(T):
        c = 0.0
        if t == 0:
            for j in range(n):
                alpha[0, j] = init[j] * emis[0, j]
                c += alpha[0, j]
        else:
            x = pos[t - 1]
            for j in range(n):
                acc = 0.0
                for i in range(n):
                    acc += alpha[t - 1, i] * trans[x, i, j]
                alpha[t, j] = acc * emis[t, j]
                c += alpha[t, j]
        if not c > 0.0:
            raise ValueError(f"observation at step {t} has zero probability under the model")
        for j in range(n):
            alpha[t, j] /= c
        scale[t] = c
    return alpha_arr, scale_arr


def backward(const double[:, :, ::1] trans, const long long[::1] pos,
             const double[:, ::1] emis, const double[::1] scale):
    cdef Py_ssize_t T = emis.shape[0], n = emis.shape[1]
    cdef Py_ssize_t t, i, j
    cdef long long x
    cdef double acc
    beta_arr = np.empty((T, n))
    cdef double[:, ::1] beta = beta_arr
    tmp_arr = np.empty(n)
    cdef double[::1] tmp = tmp_arr
    for i in range(n):
        beta[T - 1, i] = 1.0
    for t in range(T - 2, -1, -1):
        x = pos[t]
        for j in range(n):
            tmp[j] = emis[t + 1, j] * beta[t + 1, j]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += trans[x, i, j] * tmp[j]
            beta[t, i] = acc / scale[t + 1]
    return beta_arr


def accumulate_transitions(const double[:, :, ::1] trans, const long long[::1] pos,
                           const double[:, ::1] emis, const double[:, ::1] alpha,
                           const double[:, ::1] beta, const double[::1] scale,
                           double[:, :, ::1] num, double[:, ::1] den):
    cdef Py_ssize_t T = emis.shape[0], n = emis.shape[1]
    cdef Py_ssize_t t, i, j
    cdef long long x
    cdef double ai, xi, row
    w_arr = np.empty(n)
    cdef double[::1] w = w_arr
    with nogil:
        for t in range(T - 1):
            x = pos[t]
            for j in range(n):
                w[j] = emis[t + 1, j] * beta[t + 1, j] / scale[t + 1]
            for i in range(n):
                ai = alpha[t, i]
                if ai == 0.0:
                    continue
                row = 0.0
                for j in range(n):
                    xi = ai * trans[x, i, j] * w[j]
                    num[x, i, j] += xi
                    row += xi
                den[x, i] += row


cdef int _band_fractions(long a, long b, long L, long max_jump,
                         double[:, ::1] fwd, double[:, ::1] bwd) noexcept nogil:
    """Fill scaled forward/backward path counts over the band; 0 if no path."""
    cdef long lo = a if a < b else b
    cdef long hi = b if a < b else a
    cdef long w = hi - lo + 1
    cdef long u, i, j
    cdef double s, acc
    for u in range(L + 1):
        for i in range(w):
            fwd[u, i] = 0.0
            bwd[u, i] = 0.0
    fwd[0, a - lo] = 1.0
    bwd[L, b - lo] = 1.0
    for u in range(L):
        s = 0.0
        for j in range(w):
            acc = 0.0
            for i in range(w):
                if max_jump < 0 or iabs(<int>(i - j)) <= max_jump:
                    acc += fwd[u, i]
            fwd[u + 1, j] = acc
            s += acc
        if s == 0.0:
            return 0
        for j in range(w):
            fwd[u + 1, j] /= s
    if fwd[L, b - lo] == 0.0:
        return 0
    for u in range(L - 1, -1, -1):
        s = 0.0
        for i in range(w):
            acc = 0.0
            for j in range(w):
                if max_jump < 0 or iabs(<int>(i - j)) <= max_jump:
                    acc += bwd[u + 1, j]
            bwd[u, i] = acc
            s += acc
        for i in range(w):
            bwd[u, i] /= s
    return 1


cdef void _edge_offset(long u, long w, long max_jump, double[:, ::1] fwd,
                       double[:, ::1] bwd, double[:, ::1] edge) noexcept nogil:
    cdef long i, j
    cdef double s = 0.0
    for i in range(w):
        for j in range(w):
            if max_jump < 0 or iabs(<int>(i - j)) <= max_jump:
                edge[i, j] = fwd[u, i] * bwd[u + 1, j]
                s += edge[i, j]
            else:
                edge[i, j] = 0.0
    for i in range(w):
        for j in range(w):
            edge[i, j] /= s


def gap_edge_fractions(long a, long b, long L, long n, long max_jump):
    cdef long lo = a if a < b else b
    cdef long w = (b - a if a < b else a - b) + 1
    cdef long u, i, j
    out_arr = np.zeros((L, n, n))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] fwd = np.empty((L + 1, w))
    cdef double[:, ::1] bwd = np.empty((L + 1, w))
    cdef double[:, ::1] edge = np.empty((w, w))
    if not _band_fractions(a, b, L, max_jump, fwd, bwd):
        return out_arr
    for u in range(L):
        _edge_offset(u, w, max_jump, fwd, bwd, edge)
        for i in range(w):
            for j in range(w):
                out[u, lo + i, lo + j] = edge[i, j]
    return out_arr


def heuristic_accumulate(const long long[::1] values, const long long[::1] pos,
                         long n, long max_jump, double[:, :, ::1] counts):
    cdef Py_ssize_t T = values.shape[0]
    cdef Py_ssize_t k, k0 = -1
    cdef long a, b, L, lo, w, u, i, j, gaps = 0, infeasible = 0
    cdef long long x
    cdef double[:, ::1] fwd = np.empty((T + 1, n))
    cdef double[:, ::1] bwd = np.empty((T + 1, n))
    cdef double[:, ::1] edge = np.empty((n, n))
    with nogil:
        for k in range(T):
            if values[k] < 0:
                continue
            if k0 < 0:
                k0 = k
                continue
            a = values[k0]
            b = values[k]
            L = k - k0
            gaps += 1
            if a == b:
                for u in range(L):
                    counts[pos[k0 + u], a, a] += 1.0
            elif _band_fractions(a, b, L, max_jump, fwd, bwd):
                lo = a if a < b else b
                w = (b - a if a < b else a - b) + 1
                for u in range(L):
                    _edge_offset(u, w, max_jump, fwd, bwd, edge)
                    x = pos[k0 + u]
                    for i in range(w):
                        for j in range(w):
                            counts[x, lo + i, lo + j] += edge[i, j]
            else:
                infeasible += 1
            k0 = k
    return gaps, infeasible
