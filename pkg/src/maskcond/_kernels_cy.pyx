# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched MLP kernels.

Mirrors _kernels_np exactly (same functions, same semantics, agreement to
rounding error); see that module for the layer conventions. Matrix products
go through BLAS dgemm, elementwise work is fused into plain loops.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND = "compiled"


cdef inline double* _data(cnp.ndarray a) noexcept:
    return <double*> cnp.PyArray_DATA(a)


cdef void _gemm(bint ta, bint tb, int m, int n, int k, double alpha,
                double* a, double* b, double beta, double* c) noexcept nogil:
    # Row-major C(m,n) = alpha * op(A)(m,k) @ op(B)(k,n) + beta * C.
    # Fortran dgemm computes col-major C_f = op(A_f) op(B_f); feeding the
    # row-major buffers swapped yields C^T = op(B)^T op(A)^T, which is C
    # in row-major memory.
    cdef char fta = b'T' if tb else b'N'
    cdef char ftb = b'T' if ta else b'N'
    cdef int fm = n, fn = m, fk = k
    cdef int lda = k if tb else n
    cdef int ldb = m if ta else k
    cdef int ldc = n
    cdef long i
    if m == 0 or n == 0:
        return
    if k == 0:
        for i in range(<long> m * n):
            c[i] = beta * c[i]
        return
    if lda < 1:
        lda = 1
    if ldb < 1:
        ldb = 1
    dgemm(&fta, &ftb, &fm, &fn, &fk, &alpha, b, &lda, a, &ldb, &beta, c, &ldc)


def forward(list weights, list biases, object x):
    """Run the network on a batch. Returns [x, h1, ..., y] (post-activation)."""
    cdef cnp.ndarray h = np.ascontiguousarray(x, dtype=np.float64)
    cdef list acts = [h]
    cdef cnp.ndarray w, a
    cdef cnp.ndarray bias
    cdef int n_layers = len(weights)
    cdef int l
    cdef long i, j, n, dout, din
    cdef double v
    cdef double *ap
    cdef double *bp
    cdef bint relu
    for l in range(n_layers):
        w = weights[l]
        bias = biases[l]
        n = h.shape[0]
        dout = w.shape[0]
        din = w.shape[1]
        relu = l < n_layers - 1
        a = np.empty((n, dout))
        ap = _data(a)
        bp = _data(bias)
        with nogil:
            _gemm(0, 1, <int> n, <int> dout, <int> din, 1.0,
                  <double*> cnp.PyArray_DATA(h), <double*> cnp.PyArray_DATA(w), 0.0, ap)
            for i in range(n):
                for j in range(dout):
                    v = ap[i * dout + j] + bp[j]
                    if relu and v < 0.0:
                        v = 0.0
                    ap[i * dout + j] = v
        acts.append(a)
        h = a
    return acts


cdef cnp.ndarray _mask_mul(cnp.ndarray delta, cnp.ndarray gate):
    # Fresh array: delta * (gate > 0), elementwise.
    cdef cnp.ndarray out = np.empty_like(delta)
    cdef double* op = _data(out)
    cdef double* dp = _data(delta)
    cdef double* gp = _data(gate)
    cdef long i, total = delta.shape[0] * delta.shape[1]
    with nogil:
        for i in range(total):
            op[i] = dp[i] if gp[i] > 0.0 else 0.0
    return out


cdef cnp.ndarray _colsum(cnp.ndarray delta):
    cdef long n = delta.shape[0], d = delta.shape[1]
    cdef cnp.ndarray out = np.zeros(d)
    cdef double* op = _data(out)
    cdef double* dp = _data(delta)
    cdef long i, j
    with nogil:
        for i in range(n):
            for j in range(d):
                op[j] += dp[i * d + j]
    return out


def backward(list weights, list acts, object gy,
             bint need_input_grad=False, bint need_param_grads=True):
    """Reverse-mode gradients for a forward() call. Same contract as numpy."""
    cdef int n_layers = len(weights)
    cdef list dws = [None] * n_layers if need_param_grads else None
    cdef list dbs = [None] * n_layers if need_param_grads else None
    cdef cnp.ndarray delta = np.ascontiguousarray(gy, dtype=np.float64)
    cdef cnp.ndarray w, prev, dw, nd
    cdef int l
    cdef long n, dout, din
    for l in range(n_layers - 1, -1, -1):
        w = weights[l]
        prev = acts[l]
        n = delta.shape[0]
        dout = w.shape[0]
        din = w.shape[1]
        if l < n_layers - 1:
            delta = _mask_mul(delta, acts[l + 1])
        if need_param_grads:
            dw = np.empty((dout, din))
            with nogil:
                _gemm(1, 0, <int> dout, <int> din, <int> n, 1.0,
                      <double*> cnp.PyArray_DATA(delta),
                      <double*> cnp.PyArray_DATA(prev), 0.0,
                      <double*> cnp.PyArray_DATA(dw))
            dws[l] = dw
            dbs[l] = _colsum(delta)
        if l > 0 or need_input_grad:
            nd = np.empty((n, din))
            with nogil:
                _gemm(0, 0, <int> n, <int> din, <int> dout, 1.0,
                      <double*> cnp.PyArray_DATA(delta),
                      <double*> cnp.PyArray_DATA(w), 0.0,
                      <double*> cnp.PyArray_DATA(nd))
            delta = nd
    return dws, dbs, (delta if need_input_grad else None)


def grad_norm_backward(list weights, list acts):
    """Squared input-gradient norms with weight gradients; numpy contract."""
    cdef int n_layers = len(weights)
    cdef long n = (<cnp.ndarray> acts[0]).shape[0]
    cdef list p = [None] * n_layers
    cdef cnp.ndarray w, t, lam, g, tmp, pl, dw
    cdef int l
    cdef long i, j, cols

    w = weights[n_layers - 1]
    p[n_layers - 1] = np.ones((n, w.shape[0]))
    for l in range(n_layers - 2, -1, -1):
        w = weights[l + 1]
        pl = p[l + 1]
        tmp = np.empty((n, w.shape[1]))
        with nogil:
            _gemm(0, 0, <int> n, <int> w.shape[1], <int> w.shape[0], 1.0,
                  <double*> cnp.PyArray_DATA(pl),
                  <double*> cnp.PyArray_DATA(w), 0.0,
                  <double*> cnp.PyArray_DATA(tmp))
        p[l] = _mask_mul(tmp, acts[l + 1])

    w = weights[0]
    pl = p[0]
    g = np.empty((n, w.shape[1]))
    with nogil:
        _gemm(0, 0, <int> n, <int> w.shape[1], <int> w.shape[0], 1.0,
              <double*> cnp.PyArray_DATA(pl),
              <double*> cnp.PyArray_DATA(w), 0.0,
              <double*> cnp.PyArray_DATA(g))

    cdef cnp.ndarray vals = np.zeros(n)
    cdef double* vp = _data(vals)
    cdef double* gp = _data(g)
    cols = g.shape[1]
    with nogil:
        for i in range(n):
            for j in range(cols):
                vp[i] += gp[i * cols + j] * gp[i * cols + j]

    cdef list dws = [np.empty_like(wl) for wl in weights]
    cdef list dbs = [np.zeros((<cnp.ndarray> wl).shape[0]) for wl in weights]

    lam = np.empty_like(g)
    cdef double* lp = _data(lam)
    with nogil:
        for i in range(<long> n * cols):
            lp[i] = 2.0 * gp[i]

    w = weights[0]
    dw = dws[0]
    with nogil:
        _gemm(1, 0, <int> w.shape[0], <int> w.shape[1], <int> n, 1.0,
              <double*> cnp.PyArray_DATA(pl),
              <double*> cnp.PyArray_DATA(lam), 0.0,
              <double*> cnp.PyArray_DATA(dw))
    tmp = np.empty((n, w.shape[0]))
    with nogil:
        _gemm(0, 1, <int> n, <int> w.shape[0], <int> w.shape[1], 1.0,
              <double*> cnp.PyArray_DATA(lam),
              <double*> cnp.PyArray_DATA(w), 0.0,
              <double*> cnp.PyArray_DATA(tmp))
    lam = tmp

    for l in range(n_layers - 1):
        t = _mask_mul(lam, acts[l + 1])
        w = weights[l + 1]
        pl = p[l + 1]
        dw = dws[l + 1]
        with nogil:
            _gemm(1, 0, <int> w.shape[0], <int> w.shape[1], <int> n, 1.0,
                  <double*> cnp.PyArray_DATA(pl),
                  <double*> cnp.PyArray_DATA(t), 0.0,
                  <double*> cnp.PyArray_DATA(dw))
        if l + 1 < n_layers - 1:
            tmp = np.empty((n, w.shape[0]))
            with nogil:
                _gemm(0, 1, <int> n, <int> w.shape[0], <int> w.shape[1], 1.0,
                      <double*> cnp.PyArray_DATA(t),
                      <double*> cnp.PyArray_DATA(w), 0.0,
                      <double*> cnp.PyArray_DATA(tmp))
            lam = tmp
    return vals, dws, dbs
