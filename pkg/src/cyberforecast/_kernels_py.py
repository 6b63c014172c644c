"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``.

Every function here has the same signature, tie-breaking and return values
as its compiled twin, so callers never branch on the backend.
"""

import numpy as np

BACKEND = "python"


def _sqdist_matrix(A, B):
    # accumulate coordinate by coordinate, the same order as the compiled loop,
    # so exact distance ties stay ties in both backends
    D = np.zeros((A.shape[0], B.shape[0]))
    for c in range(A.shape[1]):
        diff = A[:, None, c] - B[None, :, c]
        D += diff * diff
    return D


def _row_sqdist(X, x):
    out = np.zeros(X.shape[0])
    for c in range(X.shape[1]):
        diff = X[:, c] - x[c]
        out += diff * diff
    return out


def lloyd(X, centroids, max_iter):
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.array(centroids, dtype=np.float64, order="C")
    n, d = X.shape
    k = C.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    for it in range(max_iter):
        # argmin returns the first minimum, matching the strict < scan
        new = np.argmin(_sqdist_matrix(X, C), axis=1).astype(np.int64)
        if it > 0 and np.array_equal(new, labels):
            return labels, C, it
        labels = new
        counts = np.bincount(labels, minlength=k)
        for c in range(d):
            sums = np.bincount(labels, weights=X[:, c], minlength=k)
            nz = counts > 0
            C[nz, c] = sums[nz] / counts[nz]
    return labels, C, max_iter


def _extend_farthest(X, order, mind, start, stop):
    for m in range(start, stop):
        best = int(np.argmax(mind))
        order[m] = best
        np.minimum(mind, _row_sqdist(X, X[best]), out=mind)


def farthest_first(X, first, k):
    X = np.ascontiguousarray(X, dtype=np.float64)
    order = np.zeros(k, dtype=np.int64)
    order[0] = first
    mind = _row_sqdist(X, X[first])
    _extend_farthest(X, order, mind, 1, k)
    return order


def minority_cluster_search(X, is_min, first, k_stop, max_iter):
    X = np.ascontiguousarray(X, dtype=np.float64)
    is_min = np.asarray(is_min, dtype=bool)
    n = X.shape[0]
    k_stop = min(k_stop, n + 1)
    if k_stop <= 2:
        return -1, -1, None
    order = np.zeros(k_stop, dtype=np.int64)
    order[0] = first
    mind = _row_sqdist(X, X[first])
    built = 1
    for k in range(2, k_stop):
        _extend_farthest(X, order, mind, built, k)
        built = k
        labels, C, _ = lloyd(X, X[order[:k]], max_iter)
        counts = np.bincount(labels, minlength=k)
        mins = np.bincount(labels[is_min], minlength=k)
        ok = (mins >= 2) & (2 * mins > counts)
        if ok.any():
            cand = np.where(ok, mins, -1)
            j = int(np.argmax(cand))
            return k, j, C[j].copy()
    return -1, -1, None


def knn(Q, R, k, exclude_self):
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    R = np.ascontiguousarray(R, dtype=np.float64)
    D = _sqdist_matrix(Q, R)
    if exclude_self:
        np.fill_diagonal(D, np.inf)
    return np.argsort(D, axis=1, kind="stable")[:, :k].astype(np.int64)


def auc_sorted(s, y, w):
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y)
    w = np.asarray(w, dtype=np.float64)
    if s.size == 0:
        return 0.0, 0.0, 0.0
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    pos_w = np.where(y == 1, w, 0.0)
    neg_w = np.where(y == 1, 0.0, w)
    gp = np.add.reduceat(pos_w, starts)
    gn = np.add.reduceat(neg_w, starts)
    neg_below = np.concatenate(([0.0], np.cumsum(gn)[:-1]))
    acc = float(np.sum(gp * (neg_below + 0.5 * gn)))
    return acc, float(gp.sum()), float(gn.sum())
