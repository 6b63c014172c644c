# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Lloyd iterations, farthest-first seeding, the minority
cluster search loop, k nearest neighbours and the sorted AUC sweep.

Semantics mirror ``_kernels_py`` exactly (tie-breaking by lowest index,
empty clusters keep their previous centroid).
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline double _sqdist(const double[:, ::1] A, Py_ssize_t i,
                           const double[:, ::1] B, Py_ssize_t j,
                           Py_ssize_t d) noexcept nogil:
    cdef double s = 0.0, diff
    cdef Py_ssize_t c
    for c in range(d):
        diff = A[i, c] - B[j, c]
        s += diff * diff
    return s


cdef Py_ssize_t _lloyd(const double[:, ::1] X, double[:, ::1] C,
                       cnp.int64_t[::1] labels, double[:, ::1] sums,
                       cnp.int64_t[::1] counts, Py_ssize_t max_iter) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], k = C.shape[0]
    cdef Py_ssize_t it, i, j, c, best
    cdef double bd, dist
    cdef bint changed
    for it in range(max_iter):
        changed = False
        for i in range(n):
            best = 0
            bd = _sqdist(X, i, C, 0, d)
            for j in range(1, k):
                dist = _sqdist(X, i, C, j, d)
                if dist < bd:
                    bd = dist
                    best = j
            if it == 0 or labels[i] != best:
                changed = True
            labels[i] = best
        if not changed:
            return it
        for j in range(k):
            counts[j] = 0
            for c in range(d):
                sums[j, c] = 0.0
        for i in range(n):
            j = labels[i]
            counts[j] += 1
            for c in range(d):
                sums[j, c] += X[i, c]
        for j in range(k):
            if counts[j] > 0:
                for c in range(d):
                    C[j, c] = sums[j, c] / counts[j]
    return max_iter


def lloyd(const double[:, ::1] X, centroids, Py_ssize_t max_iter):
    cdef double[:, ::1] C = np.array(centroids, dtype=np.float64, order="C")
    cdef Py_ssize_t n = X.shape[0], k = C.shape[0], d = X.shape[1]
    labels = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] lab = labels
    cdef double[:, ::1] sums = np.zeros((k, d), dtype=np.float64)
    cdef cnp.int64_t[::1] counts = np.zeros(k, dtype=np.int64)
    cdef Py_ssize_t n_iter
    with nogil:
        n_iter = _lloyd(X, C, lab, sums, counts, max_iter)
    return labels, np.asarray(C), n_iter


cdef void _extend_farthest(const double[:, ::1] X, cnp.int64_t[::1] order,
                           double[::1] mind, Py_ssize_t start,
                           Py_ssize_t stop) noexcept nogil:
    # order[:start] already chosen and mind reflects them
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, m, best
    cdef double bd, dist
    for m in range(start, stop):
        best = 0
        bd = -1.0
        for i in range(n):
            if mind[i] > bd:
                bd = mind[i]
                best = i
        order[m] = best
        for i in range(n):
            dist = _sqdist(X, i, X, best, d)
            if dist < mind[i]:
                mind[i] = dist


def farthest_first(const double[:, ::1] X, Py_ssize_t first, Py_ssize_t k):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i
    order = np.zeros(k, dtype=np.int64)
    mind = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] o = order
    cdef double[::1] md = mind
    o[0] = first
    for i in range(n):
        md[i] = _sqdist(X, i, X, first, d)
    with nogil:
        _extend_farthest(X, o, md, 1, k)
    return order


def minority_cluster_search(const double[:, ::1] X, const cnp.uint8_t[::1] is_min,
                            Py_ssize_t first, Py_ssize_t k_stop,
                            Py_ssize_t max_iter):
    """Sweep k = 2, 3, ... while k < k_stop; return (k, cluster id, centroid)
    of the first qualifying cluster, or (-1, -1, None)."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t k, i, j, c, best_j, best_min
    if k_stop > n + 1:
        k_stop = n + 1
    if k_stop <= 2:
        return -1, -1, None
    order = np.zeros(k_stop, dtype=np.int64)
    mind = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] o = order
    cdef double[::1] md = mind
    o[0] = first
    for i in range(n):
        md[i] = _sqdist(X, i, X, first, d)
    labels_a = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] labels = labels_a
    Cbuf = np.zeros((k_stop, d), dtype=np.float64)
    sums_a = np.zeros((k_stop, d), dtype=np.float64)
    counts_a = np.zeros(k_stop, dtype=np.int64)
    mins_a = np.zeros(k_stop, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = counts_a
    cdef cnp.int64_t[::1] mins = mins_a
    cdef double[:, ::1] Call = Cbuf
    cdef double[:, ::1] sums = sums_a
    cdef double[:, ::1] C, S
    cdef cnp.int64_t[::1] K
    cdef Py_ssize_t built = 1
    for k in range(2, k_stop):
        C = Call[:k]
        S = sums[:k]
        K = counts[:k]
        with nogil:
            _extend_farthest(X, o, md, built, k)
            built = k
            for j in range(k):
                for c in range(d):
                    C[j, c] = X[o[j], c]
            _lloyd(X, C, labels, S, K, max_iter)
            for j in range(k):
                counts[j] = 0
                mins[j] = 0
            for i in range(n):
                counts[labels[i]] += 1
                if is_min[i]:
                    mins[labels[i]] += 1
            best_j = -1
            best_min = 0
            for j in range(k):
                if mins[j] >= 2 and 2 * mins[j] > counts[j] and mins[j] > best_min:
                    best_min = mins[j]
                    best_j = j
        if best_j >= 0:
            return k, best_j, np.asarray(C[best_j]).copy()
    return -1, -1, None


def knn(const double[:, ::1] Q, const double[:, ::1] R, Py_ssize_t k,
        bint exclude_self):
    """Indices of the k nearest rows of R for every row of Q, nearest first,
    ties broken by lower index. With exclude_self, Q is R and row i skips i."""
    cdef Py_ssize_t m = Q.shape[0], r = R.shape[0], d = Q.shape[1]
    cdef Py_ssize_t i, j, p, filled
    cdef double dist
    out = np.zeros((m, k), dtype=np.int64)
    bestd_a = np.empty(k, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] o = out
    cdef double[::1] bestd = bestd_a
    with nogil:
        for i in range(m):
            filled = 0
            for j in range(r):
                if exclude_self and j == i:
                    continue
                dist = _sqdist(Q, i, R, j, d)
                if filled == k and dist >= bestd[k - 1]:
                    continue
                p = filled if filled < k else k - 1
                while p > 0 and bestd[p - 1] > dist:
                    if p < k:
                        bestd[p] = bestd[p - 1]
                        o[i, p] = o[i, p - 1]
                    p -= 1
                bestd[p] = dist
                o[i, p] = j
                if filled < k:
                    filled += 1
    return out


def auc_sorted(const double[::1] s, const cnp.int64_t[::1] y, const double[::1] w):
    """Weighted Mann-Whitney AUC over rows already sorted by ascending score."""
    cdef Py_ssize_t n = s.shape[0], i = 0, j
    cdef double neg_below = 0.0, acc = 0.0, gp, gn, wp = 0.0, wn = 0.0
    with nogil:
        while i < n:
            j = i
            gp = 0.0
            gn = 0.0
            while j < n and s[j] == s[i]:
                if y[j] == 1:
                    gp += w[j]
                else:
                    gn += w[j]
                j += 1
            acc += gp * (neg_below + 0.5 * gn)
            neg_below += gn
            wp += gp
            wn += gn
            i = j
    return acc, wp, wn
