# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Both kernels reproduce the arithmetic order of ``gcurate._fallback`` exactly,
so the two backends return bit-identical arrays.
"""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, NAN, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline void _isort(double* a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


cdef int _one_graph(const long long* adj_ptr, const int* nbr, Py_ssize_t n,
                    int steps, double* out) noexcept nogil:
    cdef Py_ssize_t i, j, p, m, t, maxdeg = 0
    cdef long long base = adj_ptr[0]
    cdef double acc, mean, d
    cdef double* X
    cdef double* Y
    cdef double* tmp
    cdef double* buf
    cdef double* diag
    cdef double* deg

    for j in range(n):
        if adj_ptr[j + 1] - adj_ptr[j] > maxdeg:
            maxdeg = adj_ptr[j + 1] - adj_ptr[j]
    X = <double*> malloc(n * n * sizeof(double))
    Y = <double*> malloc(n * n * sizeof(double))
    buf = <double*> malloc((maxdeg + 1) * sizeof(double))
    diag = <double*> malloc(n * sizeof(double))
    deg = <double*> malloc(n * sizeof(double))
    if X == NULL or Y == NULL or buf == NULL or diag == NULL or deg == NULL:
        free(X); free(Y); free(buf); free(diag); free(deg)
        return -1

    for j in range(n):
        deg[j] = <double> (adj_ptr[j + 1] - adj_ptr[j])
    for i in range(n * n):
        X[i] = 0.0
    for i in range(n):
        X[i * n + i] = 1.0

    for t in range(steps):
        for i in range(n):
            for j in range(n):
                m = 0
                for p in range(adj_ptr[j] - base, adj_ptr[j + 1] - base):
                    buf[m] = X[i * n + nbr[p]] / deg[nbr[p]]
                    m += 1
                _isort(buf, m)
                acc = 0.0
                for p in range(m):
                    acc = acc + buf[p]
                Y[i * n + j] = acc
        tmp = X
        X = Y
        Y = tmp

        for i in range(n):
            diag[i] = X[i * n + i]
        _isort(diag, n)
        acc = 0.0
        for i in range(n):
            acc = acc + diag[i]
        mean = acc / n
        acc = 0.0
        for i in range(n):
            d = diag[i] - mean
            acc = acc + d * d
        out[2 * t] = mean
        out[2 * t + 1] = sqrt(acc / n)

    free(X); free(Y); free(buf); free(diag); free(deg)
    return 0


def rw_signature_batch(const long long[::1] node_ptr, const long long[::1] adj_ptr,
                       const int[::1] nbr, int steps, int num_threads=1):
    """Per-graph (mean, std) of diag(M^t), t = 1..steps, for a packed batch."""
    cdef Py_ssize_t G = node_ptr.shape[0] - 1
    cdef Py_ssize_t g, t
    cdef int rc
    out_arr = np.empty((G, 2 * steps), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if G == 0:
        return out_arr
    if num_threads < 1:
        num_threads = 1
    for g in prange(G, nogil=True, schedule="dynamic", num_threads=num_threads):
        rc = _one_graph(&adj_ptr[node_ptr[g]], &nbr[adj_ptr[node_ptr[g]]],
                        node_ptr[g + 1] - node_ptr[g],
                        steps, &out[g, 0])
        if rc != 0:
            for t in range(2 * steps):
                out[g, t] = NAN
    if np.isnan(out_arr).any():
        raise MemoryError("random-walk kernel could not allocate its work buffers")
    return out_arr


def assign_nearest(const double[:, ::1] X, const double[:, ::1] C, int num_threads=1):
    """Nearest centroid per row (ties to lowest index) and its squared distance."""
    cdef Py_ssize_t M = X.shape[0], K = C.shape[0], D = X.shape[1]
    cdef Py_ssize_t i, k, j, bi
    cdef double best, acc, diff
    labels_arr = np.empty(M, dtype=np.int64)
    d2_arr = np.empty(M, dtype=np.float64)
    cdef long long[::1] labels = labels_arr
    cdef double[::1] d2 = d2_arr
    if num_threads < 1:
        num_threads = 1
    for i in prange(M, nogil=True, schedule="static", num_threads=num_threads):
        best = INFINITY
        bi = 0
        for k in range(K):
            acc = 0.0
            for j in range(D):
                diff = X[i, j] - C[k, j]
                acc = acc + diff * diff
            if acc < best:
                best = acc
                bi = k
        labels[i] = bi
        d2[i] = best
    return labels_arr, d2_arr
