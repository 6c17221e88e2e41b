# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched reward kernels.

Same contract as numpy_backend: family codes
0 min | 1 mean | 2 max | 3 power-sum | 4 power-mean | 5 lse | 6 softmax.
Exponent-based families subtract the column max before exponentiating.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, pow

cnp.import_array()


cdef double _agg(const double* v, Py_ssize_t n, Py_ssize_t stride,
                 int code, double t) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc, m, w, wsum, out
    if code == 0:      # min
        acc = v[0]
        for i in range(1, n):
            if v[i * stride] < acc:
                acc = v[i * stride]
        return acc
    if code == 1:      # mean
        acc = 0.0
        for i in range(n):
            acc += v[i * stride]
        return acc / n
    if code == 2:      # max
        acc = v[0]
        for i in range(1, n):
            if v[i * stride] > acc:
                acc = v[i * stride]
        return acc
    if code == 3:      # power-sum
        acc = 0.0
        for i in range(n):
            acc += pow(v[i * stride], t)
        return acc
    if code == 4:      # power-mean; 0^t with t<0 makes the whole mean inf -> 0
        acc = 0.0
        for i in range(n):
            if t < 0 and v[i * stride] == 0.0:
                return 0.0
            acc += pow(v[i * stride], t)
        return pow(acc / n, 1.0 / t)
    # lse / softmax share the stabilized exponent pass
    m = v[0]
    for i in range(1, n):
        if v[i * stride] > m:
            m = v[i * stride]
    if code == 5:      # lse
        acc = 0.0
        for i in range(n):
            acc += exp(t * (v[i * stride] - m))
        return (t * m + log(acc)) / t
    # softmax (code 6)
    wsum = 0.0
    out = 0.0
    for i in range(n):
        w = exp(t * (v[i * stride] - m))
        wsum += w
        out += w * v[i * stride]
    return out / wsum


def batch_scores(cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] batch,
                 int code, double t):
    cdef Py_ssize_t b = batch.shape[0]
    cdef Py_ssize_t n = batch.shape[1]
    cdef Py_ssize_t m = batch.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((b, m))
    cdef Py_ssize_t i, j
    cdef const double* base = <const double*> batch.data
    with nogil:
        for i in range(b):
            for j in range(m):
                out[i, j] = _agg(base + i * n * m + j, n, m, code, t)
    return out


def batch_reward(cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] batch,
                 int inner_code, double inner_t,
                 int outer_code, double outer_t):
    cdef Py_ssize_t b = batch.shape[0]
    cdef Py_ssize_t n = batch.shape[1]
    cdef Py_ssize_t m = batch.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(b)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scores = np.empty(m)
    cdef Py_ssize_t i, j
    cdef const double* base = <const double*> batch.data
    cdef double* sc = <double*> scores.data
    with nogil:
        for i in range(b):
            for j in range(m):
                sc[j] = _agg(base + i * n * m + j, n, m, inner_code, inner_t)
            out[i] = _agg(sc, m, 1, outer_code, outer_t)
    return out
