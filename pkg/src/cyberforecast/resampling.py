"""Training-set rebalancing: SMOTE, spread subsampling and SMOTE++.

Distances are Euclidean on z-scored features (column mean/std of the
dataset being filtered). Synthetic rows are interpolated in raw units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dataset import WeightedDataset


class ResamplingError(ValueError):
    pass


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def minority_label(ds: WeightedDataset) -> int:
    """The class with fewer rows; class 1 on a tie."""
    return 0 if ds.class_count(0) < ds.class_count(1) else 1


def standardize(X: np.ndarray):
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return np.ascontiguousarray((X - mean) / std), mean, std


@dataclass(frozen=True)
class SmotePPConfig:
    p: float = 20.0
    k2: int = 5
    kmeans_max_iter: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p < 100:
            raise ResamplingError(f"p must lie in [0, 100), got {self.p}")
        if self.k2 < 1:
            raise ResamplingError("k2 must be >= 1")
        if self.kmeans_max_iter < 1:
            raise ResamplingError("kmeans_max_iter must be >= 1")


@dataclass(frozen=True)
class ClusterResult:
    assignments: np.ndarray
    centroids: np.ndarray
    n_iter: int
    minority_cluster: tuple | None = None  # (cluster id, centroid)


def kmeans(X, k: int, seed: int = 0, max_iter: int = 100) -> ClusterResult:
    """Lloyd's algorithm from a farthest-first seeding.

    The first centre is a seeded uniform pick; each next one is the row
    farthest from the centres chosen so far (lowest index on ties).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if k < 1:
        raise ResamplingError("k must be >= 1")
    if k > n:
        raise ResamplingError(f"k={k} exceeds the {n} rows")
    first = int(np.random.default_rng(seed).integers(n))
    init = kernels.farthest_first(X, first, k)
    labels, centroids, n_iter = kernels.lloyd(X, X[init], max_iter)
    return ClusterResult(labels, centroids, int(n_iter))


@dataclass(frozen=True)
class MinorityCluster:
    found: bool
    centroid: np.ndarray  # raw feature units
    k: int | None = None


def find_minority_cluster(ds: WeightedDataset, config: SmotePPConfig) -> MinorityCluster:
    """Sweep k = 2, 3, ... until some cluster is a minority cluster.

    A cluster qualifies when more than half its rows are minority and it
    holds at least two of them; among qualifying clusters the one with most
    minority rows wins. The sweep stops before k reaches the minority
    count; if nothing qualified the centroid is the plain minority mean.
    """
    mlab = minority_label(ds)
    is_min = ds.y == mlab
    s_min = int(is_min.sum())
    if s_min == 0:
        raise ResamplingError("no minority rows")
    Z, mean, std = standardize(ds.X)
    first = int(np.random.default_rng(config.seed).integers(len(ds)))
    k, _, c = kernels.minority_cluster_search(Z, is_min.astype(np.uint8), first,
                                              min(s_min, len(ds) + 1), config.kmeans_max_iter)
    if k > 0:
        return MinorityCluster(True, c * std + mean, int(k))
    return MinorityCluster(False, ds.X[is_min].mean(axis=0), None)


def remove_near_majority(ds: WeightedDataset, c_min, p: float) -> WeightedDataset:
    """Drop round(p% of majority rows) closest to ``c_min``; order preserved.

    At least one majority row always survives, since rounding a p just
    under 100 on a tiny majority would otherwise remove the whole class.
    """
    if not 0 <= p < 100:
        raise ResamplingError(f"p must lie in [0, 100), got {p}")
    mlab = minority_label(ds)
    maj = np.flatnonzero(ds.y != mlab)
    n_remove = min(round_half_up(p * len(maj) / 100.0), max(len(maj) - 1, 0))
    if n_remove == 0:
        return ds.with_meta(removed=0)
    Z, mean, std = standardize(ds.X)
    zc = (np.asarray(c_min, dtype=np.float64) - mean) / std
    dist = ((Z[maj] - zc) ** 2).sum(axis=1)
    drop = maj[np.argsort(dist, kind="stable")[:n_remove]]
    keep = np.ones(len(ds), dtype=bool)
    keep[drop] = False
    return ds.subset(np.flatnonzero(keep)).with_meta(removed=int(n_remove))


def _synthesize(X_min: np.ndarray, n_new: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """SMOTE interpolation: each new row lies on the segment between a
    minority row and one of its k nearest minority neighbours."""
    s_min = X_min.shape[0]
    if n_new <= 0:
        return np.zeros((0, X_min.shape[1]))
    k = min(k, s_min - 1)
    Z, _, _ = standardize(X_min)
    nn = kernels.knn(Z, Z, k, True)
    per, rem = divmod(n_new, s_min)
    base = np.repeat(np.arange(s_min), per)
    if rem:
        base = np.concatenate([base, np.sort(rng.choice(s_min, rem, replace=False))])
        base.sort(kind="stable")
    pick = nn[base, rng.integers(k, size=len(base))]
    gap = rng.random(len(base))[:, None]
    return X_min[base] + gap * (X_min[pick] - X_min[base])


def _append_synthetic(ds: WeightedDataset, X_new, label: int, **meta) -> WeightedDataset:
    n = len(X_new)
    return ds.replace(X=np.vstack([ds.X, X_new]) if n else ds.X,
                      y=np.concatenate([ds.y, np.full(n, label)]),
                      w=np.concatenate([ds.w, np.ones(n)]),
                      meta={**ds.meta, **meta})


def balancing_percent(ds: WeightedDataset) -> float:
    """SMOTE percentage that brings the minority count up to the majority's."""
    mlab = minority_label(ds)
    s_min, s_maj = ds.class_count(mlab), ds.class_count(1 - mlab)
    return 100.0 * (s_maj - s_min) / s_min if s_min else 0.0


def smote(ds: WeightedDataset, percent: float, k: int = 5, seed: int = 0) -> WeightedDataset:
    """Add round(percent/100 * sMin) interpolated minority rows of weight 1."""
    if percent < 0:
        raise ResamplingError("percent must be >= 0")
    mlab = minority_label(ds)
    is_min = ds.y == mlab
    s_min = int(is_min.sum())
    if s_min < 2:
        raise ResamplingError(f"SMOTE needs at least 2 minority rows, got {s_min}")
    n_new = round_half_up(percent / 100.0 * s_min)
    rng = np.random.default_rng(seed)
    X_new = _synthesize(ds.X[is_min], n_new, k, rng)
    return _append_synthetic(ds, X_new, mlab, synthetic=int(n_new))


def spread_subsample(ds: WeightedDataset, target_ratio: float = 1.0, seed: int = 0) -> WeightedDataset:
    """Keep a uniform random majority subset of ceil(target_ratio * sMin) rows."""
    if target_ratio < 1:
        raise ResamplingError("target_ratio must be >= 1")
    mlab = minority_label(ds)
    maj = np.flatnonzero(ds.y != mlab)
    target = math.ceil(target_ratio * ds.class_count(mlab))
    if len(maj) <= target:
        return ds.with_meta(removed=0)
    rng = np.random.default_rng(seed)
    keep_maj = rng.choice(maj, target, replace=False)
    keep = np.sort(np.concatenate([np.flatnonzero(ds.y == mlab), keep_maj]))
    return ds.subset(keep).with_meta(removed=int(len(maj) - target))


def smote_pp(ds: WeightedDataset, config: SmotePPConfig = SmotePPConfig()) -> WeightedDataset:
    """SMOTE++: prune majority rows near the minority cluster, reweigh, oversample.

    Surviving majority rows get weight 100 / (100 - p_eff) where p_eff is
    the percentage actually removed (equal to ``config.p`` whenever
    p * sMaj / 100 is whole), so the majority total stays at sMaj. Original
    minority rows get sMaj / sMin / 2 each and round(sMaj / 2) unit-weight
    synthetic rows bring the minority total to sMaj within that weight.
    """
    mlab = minority_label(ds)
    s_min = ds.class_count(mlab)
    s_maj = ds.class_count(1 - mlab)
    if s_min == 0 or s_maj == 0:
        raise ResamplingError("SMOTE++ needs both classes present")

    cluster = find_minority_cluster(ds, config)
    pruned = remove_near_majority(ds, cluster.centroid, config.p)
    removed = int(pruned.meta.get("removed", 0))
    survivors = s_maj - removed
    p_eff = 100.0 * removed / s_maj
    maj_weight = s_maj / survivors  # == 100 / (100 - p_eff)
    min_w = s_maj / s_min / 2.0

    w = np.where(pruned.y == mlab, min_w, maj_weight)
    n_syn = round_half_up(min_w * s_min)
    warning = ""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    X_min = pruned.X[pruned.y == mlab]
    if s_min < 2:
        warnings.warn("SMOTE++ with a single minority row: duplicating it", RuntimeWarning,
                      stacklevel=2)
        warning = "single_minority_row_duplicated"
        X_new = np.repeat(X_min, n_syn, axis=0)
    else:
        X_new = _synthesize(X_min, n_syn, config.k2, rng)
    out = _append_synthetic(pruned.replace(w=w), X_new, mlab)
    min_total = float(out.w[out.y == mlab].sum())
    maj_total = float(out.w[out.y != mlab].sum())
    return out.with_meta(
        removed=removed, synthetic=int(n_syn), maj_weight=maj_weight, min_weight=min_w,
        cluster_found=cluster.found, cluster_k=cluster.k or 0,
        minority_total=min_total, majority_total=maj_total,
        residual_imbalance=min_total - maj_total, warning=warning,
    )
