# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Q-network kernels; semantics match qpress.kernels.reference."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef void _affine(
    const double[:, ::1] a,
    const double[:, ::1] w,
    const double[::1] b,
    double[:, ::1] out,
    bint relu,
) noexcept nogil:
    cdef Py_ssize_t rows = a.shape[0]
    cdef Py_ssize_t inner = a.shape[1]
    cdef Py_ssize_t cols = w.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(rows):
        for j in range(cols):
            acc = b[j]
            for k in range(inner):
                acc += a[i, k] * w[j, k]
            if relu and acc < 0.0:
                acc = 0.0
            out[i, j] = acc


def mlp_forward(x, weights, biases):
    cdef Py_ssize_t last = len(weights) - 1
    cdef Py_ssize_t l
    a = np.ascontiguousarray(x, dtype=np.float64)
    for l in range(last + 1):
        w = np.ascontiguousarray(weights[l], dtype=np.float64)
        b = np.ascontiguousarray(biases[l], dtype=np.float64)
        out = np.empty((a.shape[0], w.shape[0]), dtype=np.float64)
        _affine(a, w, b, out, l < last)
        a = out
    return a


def mlp_backward(x, actions, targets, weights, biases):
    cdef Py_ssize_t n_layers = len(weights)
    cdef Py_ssize_t last = n_layers - 1
    cdef Py_ssize_t l, i, j, k
    cdef Py_ssize_t batch = x.shape[0]

    acts = [np.ascontiguousarray(x, dtype=np.float64)]
    a = acts[0]
    for l in range(n_layers):
        w = np.ascontiguousarray(weights[l], dtype=np.float64)
        b = np.ascontiguousarray(biases[l], dtype=np.float64)
        out = np.empty((a.shape[0], w.shape[0]), dtype=np.float64)
        _affine(a, w, b, out, l < last)
        acts.append(out)
        a = out

    cdef cnp.ndarray[cnp.int64_t, ndim=1] act_idx = np.ascontiguousarray(
        actions, dtype=np.int64
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tgt = np.ascontiguousarray(
        targets, dtype=np.float64
    )
    cdef double[:, ::1] q = acts[n_layers]
    cdef double loss = 0.0
    cdef double err

    delta_arr = np.zeros((batch, q.shape[1]), dtype=np.float64)
    cdef double[:, ::1] delta = delta_arr
    for i in range(batch):
        err = q[i, act_idx[i]] - tgt[i]
        loss += err * err
        delta[i, act_idx[i]] = 2.0 * err / batch
    loss /= batch

    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    cdef double[:, ::1] dmv, amv, wmv, gw, nxt
    cdef double[::1] gb
    cdef double acc
    cdef Py_ssize_t rows, cols, inner
    for l in range(last, -1, -1):
        amv = acts[l]
        dmv = delta_arr
        rows = dmv.shape[1]
        cols = amv.shape[1]
        gw_arr = np.empty((rows, cols), dtype=np.float64)
        gb_arr = np.empty(rows, dtype=np.float64)
        gw = gw_arr
        gb = gb_arr
        with nogil:
            # grad_w = delta.T @ a; grad_b = column sums of delta
            for j in range(rows):
                acc = 0.0
                for i in range(dmv.shape[0]):
                    acc += dmv[i, j]
                gb[j] = acc
                for k in range(cols):
                    acc = 0.0
                    for i in range(dmv.shape[0]):
                        acc += dmv[i, j] * amv[i, k]
                    gw[j, k] = acc
        grads_w[l] = gw_arr
        grads_b[l] = gb_arr

        if l > 0:
            wmv = np.ascontiguousarray(weights[l], dtype=np.float64)
            nxt_arr = np.empty((batch, wmv.shape[1]), dtype=np.float64)
            nxt = nxt_arr
            with nogil:
                # delta_prev = (delta @ w) masked by the ReLU gate
                for i in range(batch):
                    for k in range(wmv.shape[1]):
                        acc = 0.0
                        for j in range(wmv.shape[0]):
                            acc += dmv[i, j] * wmv[j, k]
                        if amv[i, k] <= 0.0:
                            acc = 0.0
                        nxt[i, k] = acc
            delta_arr = nxt_arr

    return loss, grads_w, grads_b
