# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementations of the hot kernels.

Semantics match ``fedflip._kernels._numpy`` (same parameter layout, same
return shapes); floating-point results may differ at rounding level because
summation orders differ.
"""

import numpy as np

from libc.math cimport exp, log

NAME = "cython"


cdef inline void _insertion_sort(double* buf, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > key:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = key


def logits(double[::1] params, Py_ssize_t input_dim, Py_ssize_t hidden_dim,
           Py_ssize_t num_classes, double[:, ::1] X):
    """Class scores for every row of X, shape (n, num_classes)."""
    cdef Py_ssize_t n = X.shape[0]
    out_arr = np.empty((n, num_classes), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    hidden_arr = np.empty(hidden_dim if hidden_dim > 0 else 1, dtype=np.float64)
    cdef double[::1] hid = hidden_arr
    cdef Py_ssize_t i, j, c, b1, w2, b2
    cdef double acc

    if hidden_dim == 0:
        b1 = input_dim * num_classes
        with nogil:
            for i in range(n):
                for c in range(num_classes):
                    acc = params[b1 + c]
                    for j in range(input_dim):
                        acc += X[i, j] * params[j * num_classes + c]
                    out[i, c] = acc
        return out_arr

    b1 = input_dim * hidden_dim
    w2 = b1 + hidden_dim
    b2 = w2 + hidden_dim * num_classes
    with nogil:
        for i in range(n):
            for j in range(hidden_dim):
                acc = params[b1 + j]
                for c in range(input_dim):
                    acc += X[i, c] * params[c * hidden_dim + j]
                hid[j] = acc if acc > 0.0 else 0.0
            for c in range(num_classes):
                acc = params[b2 + c]
                for j in range(hidden_dim):
                    acc += hid[j] * params[w2 + j * num_classes + c]
                out[i, c] = acc
    return out_arr


def loss_and_grad(double[::1] params, Py_ssize_t input_dim, Py_ssize_t hidden_dim,
                  Py_ssize_t num_classes, double[:, ::1] X, long[::1] y):
    """Mean cross-entropy loss and its gradient w.r.t. the flat params."""
    cdef Py_ssize_t n = X.shape[0]
    grad_arr = np.zeros(params.shape[0], dtype=np.float64)
    cdef double[::1] grad = grad_arr
    scores_arr = np.empty(num_classes, dtype=np.float64)
    cdef double[::1] z = scores_arr
    pre_arr = np.empty(hidden_dim if hidden_dim > 0 else 1, dtype=np.float64)
    cdef double[::1] pre = pre_arr
    cdef Py_ssize_t i, j, c, yi, b1, w2, b2
    cdef double acc, zmax, zsum, dz, dh, loss = 0.0
    cdef double inv_n = 1.0 / n

    if hidden_dim == 0:
        b1 = input_dim * num_classes
        with nogil:
            for i in range(n):
                yi = y[i]
                zmax = -1e308
                for c in range(num_classes):
                    acc = params[b1 + c]
                    for j in range(input_dim):
                        acc += X[i, j] * params[j * num_classes + c]
                    z[c] = acc
                    if acc > zmax:
                        zmax = acc
                zsum = 0.0
                for c in range(num_classes):
                    zsum += exp(z[c] - zmax)
                loss += log(zsum) + zmax - z[yi]
                for c in range(num_classes):
                    dz = (exp(z[c] - zmax) / zsum - (1.0 if c == yi else 0.0)) * inv_n
                    grad[b1 + c] += dz
                    for j in range(input_dim):
                        grad[j * num_classes + c] += X[i, j] * dz
        return loss * inv_n, grad_arr

    b1 = input_dim * hidden_dim
    w2 = b1 + hidden_dim
    b2 = w2 + hidden_dim * num_classes
    hid_arr = np.empty(hidden_dim, dtype=np.float64)
    cdef double[::1] hid = hid_arr
    with nogil:
        for i in range(n):
            yi = y[i]
            for j in range(hidden_dim):
                acc = params[b1 + j]
                for c in range(input_dim):
                    acc += X[i, c] * params[c * hidden_dim + j]
                pre[j] = acc
                hid[j] = acc if acc > 0.0 else 0.0
            zmax = -1e308
            for c in range(num_classes):
                acc = params[b2 + c]
                for j in range(hidden_dim):
                    acc += hid[j] * params[w2 + j * num_classes + c]
                z[c] = acc
                if acc > zmax:
                    zmax = acc
            zsum = 0.0
            for c in range(num_classes):
                zsum += exp(z[c] - zmax)
            loss += log(zsum) + zmax - z[yi]
            for c in range(num_classes):
                dz = (exp(z[c] - zmax) / zsum - (1.0 if c == yi else 0.0)) * inv_n
                grad[b2 + c] += dz
                for j in range(hidden_dim):
                    grad[w2 + j * num_classes + c] += hid[j] * dz
                z[c] = dz
            for j in range(hidden_dim):
                if pre[j] <= 0.0:
                    continue
                dh = 0.0
                for c in range(num_classes):
                    dh += z[c] * params[w2 + j * num_classes + c]
                grad[b1 + j] += dh
                for c in range(input_dim):
                    grad[c * hidden_dim + j] += X[i, c] * dh
    return loss * inv_n, grad_arr


def weighted_average(double[:, ::1] stack, double[::1] weights):
    """Convex combination of the rows of ``stack``; weights normalized here."""
    cdef Py_ssize_t m = stack.shape[0], d = stack.shape[1]
    cdef Py_ssize_t i, j
    cdef double wsum = 0.0, w
    out_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(m):
            wsum += weights[i]
        for i in range(m):
            w = weights[i] / wsum
            for j in range(d):
                out[j] += w * stack[i, j]
    return out_arr


def coordinate_median(double[:, ::1] stack):
    """Per-coordinate median; even row counts average the two central values."""
    cdef Py_ssize_t m = stack.shape[0], d = stack.shape[1]
    cdef Py_ssize_t i, j
    out_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] out = out_arr
    buf_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    with nogil:
        for j in range(d):
            for i in range(m):
                buf[i] = stack[i, j]
            _insertion_sort(&buf[0], m)
            if m % 2 == 1:
                out[j] = buf[m // 2]
            else:
                out[j] = 0.5 * (buf[m // 2 - 1] + buf[m // 2])
    return out_arr


def trimmed_mean(double[:, ::1] stack, Py_ssize_t trim):
    """Per-coordinate mean after dropping the ``trim`` smallest and largest."""
    cdef Py_ssize_t m = stack.shape[0], d = stack.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc
    out_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] out = out_arr
    buf_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    with nogil:
        for j in range(d):
            for i in range(m):
                buf[i] = stack[i, j]
            if trim > 0:
                _insertion_sort(&buf[0], m)
            acc = 0.0
            for i in range(trim, m - trim):
                acc += buf[i]
            out[j] = acc / (m - 2 * trim)
    return out_arr


def krum_scores(double[:, ::1] stack, Py_ssize_t n_neighbors):
    """Sum of squared distances from each row to its n_neighbors nearest rows."""
    cdef Py_ssize_t m = stack.shape[0], d = stack.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    d2_arr = np.zeros((m, m), dtype=np.float64)
    cdef double[:, ::1] d2 = d2_arr
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    buf_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    with nogil:
        for i in range(m):
            for j in range(i + 1, m):
                acc = 0.0
                for k in range(d):
                    diff = stack[i, k] - stack[j, k]
                    acc += diff * diff
                d2[i, j] = acc
                d2[j, i] = acc
        for i in range(m):
            k = 0
            for j in range(m):
                if j != i:
                    buf[k] = d2[i, j]
                    k += 1
            _insertion_sort(&buf[0], m - 1)
            acc = 0.0
            for j in range(n_neighbors):
                acc += buf[j]
            out[i] = acc
    return out_arr
