# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled CTC forward-backward kernel.

Same contract as scriptorium._ctc_py.forward_backward; selected at import
time by scriptorium.ctc when built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log1p

cnp.import_array()


cdef inline double logadd(double a, double b) noexcept nogil:
    cdef double t
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a < b:
        t = a; a = b; b = t
    return a + log1p(exp(b - a))


def forward_backward(cnp.ndarray[cnp.float64_t, ndim=2] log_probs,
                     cnp.ndarray[cnp.int64_t, ndim=1] labels):
    cdef Py_ssize_t T = log_probs.shape[0]
    cdef Py_ssize_t C = log_probs.shape[1]
    cdef Py_ssize_t L = labels.shape[0]
    cdef Py_ssize_t S = 2 * L + 1
    cdef Py_ssize_t t, s

    cdef cnp.ndarray[cnp.int64_t, ndim=1] ext_arr = np.zeros(S, dtype=np.int64)
    if L:
        ext_arr[1::2] = labels
    cdef cnp.int64_t[::1] ext = ext_arr

    cdef cnp.ndarray[cnp.uint8_t, ndim=1] skip_arr = np.zeros(S, dtype=np.uint8)
    cdef cnp.uint8_t[::1] skip = skip_arr
    for s in range(2, S):
        if ext[s] != 0 and ext[s] != ext[s - 2]:
            skip[s] = 1

    cdef cnp.ndarray[cnp.float64_t, ndim=2] alpha_arr = np.full((T, S), -INFINITY)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] beta_arr = np.full((T, S), -INFINITY)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] lp = np.ascontiguousarray(log_probs)

    cdef cnp.ndarray[cnp.float64_t, ndim=2] gamma_arr = np.zeros((T, C))
    cdef double[:, ::1] gamma = gamma_arr

    cdef double acc, log_p, em
    with nogil:
        alpha[0, 0] = lp[0, ext[0]]
        if S > 1:
            alpha[0, 1] = lp[0, ext[1]]
        for t in range(1, T):
            for s in range(S - 1, -1, -1):
                acc = alpha[t - 1, s]
                if s >= 1:
                    acc = logadd(acc, alpha[t - 1, s - 1])
                if s >= 2 and skip[s]:
                    acc = logadd(acc, alpha[t - 1, s - 2])
                alpha[t, s] = acc + lp[t, ext[s]]

        log_p = alpha[T - 1, S - 1]
        if S > 1:
            log_p = logadd(log_p, alpha[T - 1, S - 2])

    if log_p == -INFINITY:
        return float("inf"), gamma_arr

    with nogil:
        beta[T - 1, S - 1] = lp[T - 1, ext[S - 1]]
        if S > 1:
            beta[T - 1, S - 2] = lp[T - 1, ext[S - 2]]
        for t in range(T - 2, -1, -1):
            for s in range(S):
                acc = beta[t + 1, s]
                if s + 1 < S:
                    acc = logadd(acc, beta[t + 1, s + 1])
                if s + 2 < S and skip[s + 2]:
                    acc = logadd(acc, beta[t + 1, s + 2])
                beta[t, s] = acc + lp[t, ext[s]]

        # alpha and beta both carry the emission at t; divide one copy out
        for t in range(T):
            for s in range(S):
                em = lp[t, ext[s]]
                if alpha[t, s] != -INFINITY and beta[t, s] != -INFINITY:
                    gamma[t, ext[s]] += exp(alpha[t, s] + beta[t, s] - em - log_p)

    return float(-log_p), gamma_arr
