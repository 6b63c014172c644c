import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from cyberforecast import kernels, _kernels_py

BACKENDS = [_kernels_py]
try:
    from cyberforecast import _kernels as _kc
    BACKENDS.append(_kc)
except ImportError:  # extension not built
    _kc = None

both = pytest.mark.parametrize("k", BACKENDS, ids=lambda m: m.BACKEND)

small_floats = st.floats(-50, 50, allow_nan=False, width=64)


def brute_knn(Q, R, k, exclude_self):
    out = []
    for i, q in enumerate(Q):
        d = ((R - q) ** 2).sum(axis=1)
        cand = [j for j in range(len(R)) if not (exclude_self and j == i)]
        cand.sort(key=lambda j: (d[j], j))
        out.append(cand[:k])
    return np.array(out, dtype=np.int64)


def test_backend_selection(monkeypatch):
    assert kernels.get_backend("python") is _kernels_py
    assert kernels.BACKEND in ("cython", "python")
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@both
@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 25), st.integers(1, 4)),
                  elements=st.integers(-5, 5).map(float)),
       st.integers(1, 6), st.booleans())
def test_knn_matches_brute_force(k, X, kk, excl):
    kk = min(kk, len(X) - (1 if excl else 0))
    got = k.knn(np.ascontiguousarray(X), np.ascontiguousarray(X), kk, excl)
    np.testing.assert_array_equal(got, brute_knn(X, X, kk, excl))


@both
def test_farthest_first_order(k):
    X = np.array([[0.0, 0], [1, 0], [10, 0], [5, 0], [10, 0.5]])
    order = k.farthest_first(X, 0, 3)
    # from 0: farthest is (10,0.5); then the point farthest from both is (5,0)
    assert list(order) == [0, 4, 3]


@both
def test_lloyd_two_blobs(k, rng):
    a = rng.normal(0, 0.1, (30, 2))
    b = rng.normal(5, 0.1, (30, 2))
    X = np.ascontiguousarray(np.vstack([a, b]))
    labels, C, it = k.lloyd(X, np.ascontiguousarray(X[[0, 1]]), 100)
    assert len(set(labels[:30])) == 1 and len(set(labels[30:])) == 1
    assert labels[0] != labels[30]
    assert it >= 1


@both
def test_lloyd_fixpoint_properties(k, rng):
    X = np.ascontiguousarray(rng.normal(size=(60, 3)))
    labels, C, _ = k.lloyd(X, np.ascontiguousarray(X[:4]), 200)
    # every row is assigned to its nearest centroid
    d = ((X[:, None, :] - C[None]) ** 2).sum(-1)
    np.testing.assert_array_equal(labels, d.argmin(1))
    # every non-empty centroid is its cluster mean
    for j in range(4):
        if (labels == j).any():
            np.testing.assert_allclose(C[j], X[labels == j].mean(0), atol=1e-12)


@both
def test_auc_sorted_counts_ties(k):
    s = np.array([0.1, 0.5, 0.5, 0.9])
    y = np.array([0, 0, 1, 1], dtype=np.int64)
    w = np.ones(4)
    acc, wp, wn = k.auc_sorted(s, y, w)
    assert (wp, wn) == (2.0, 2.0)
    assert acc == pytest.approx(3.5)


@pytest.mark.skipif(_kc is None, reason="compiled kernels not built")
@given(st.integers(0, 10_000))
def test_backends_agree(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(4, 40))
    X = np.ascontiguousarray(r.normal(size=(n, 3)).round(1))
    is_min = (r.random(n) < 0.3).astype(np.uint8)
    first = int(r.integers(n))
    kk = int(r.integers(1, n))
    np.testing.assert_array_equal(_kc.farthest_first(X, first, kk),
                                  _kernels_py.farthest_first(X, first, kk))
    init = np.ascontiguousarray(X[_kernels_py.farthest_first(X, first, kk)])
    a, b = _kc.lloyd(X, init.copy(), 50), _kernels_py.lloyd(X, init.copy(), 50)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], rtol=0, atol=1e-12)
    assert a[2] == b[2]
    m1 = _kc.minority_cluster_search(X, is_min, first, n, 50)
    m2 = _kernels_py.minority_cluster_search(X, is_min, first, n, 50)
    assert m1[:2] == m2[:2]
    if m1[2] is not None:
        np.testing.assert_allclose(m1[2], m2[2], atol=1e-12)
    np.testing.assert_array_equal(_kc.knn(X, X, min(3, n - 1), True),
                                  _kernels_py.knn(X, X, min(3, n - 1), True))
    s = np.sort(r.random(n).round(1))
    y = (r.random(n) < 0.5).astype(np.int64)
    w = r.random(n) + 0.1
    np.testing.assert_allclose(_kc.auc_sorted(s, y, w), _kernels_py.auc_sorted(s, y, w),
                               rtol=1e-12)
