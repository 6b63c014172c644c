"""Weighted instance sets, Low/High discretization and CSV persistence."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

LOW, HIGH = 0, 1
BIN_LABELS = ("Low", "High")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class InstanceRow:
    features: tuple
    class_label: int
    weight: float = 1.0


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightedDataset:
    """Immutable table of feature rows, binary labels and positive weights.

    ``discrete`` marks features holding bin indices (0 = Low, 1 = High)
    rather than raw signal values.
    """

    X: np.ndarray
    y: np.ndarray
    w: np.ndarray
    signals: tuple = ()
    class_name: str = "class"
    provenance: Mapping[str, str] = field(default_factory=dict)
    discrete: bool = False
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if len(self.signals) == 1 else X.reshape(len(X), -1)
        n = X.shape[0]
        signals = tuple(self.signals) or tuple(f"signal_{i + 1}" for i in range(X.shape[1]))
        if X.shape[1] != len(signals):
            raise DatasetError(f"{X.shape[1]} feature columns but {len(signals)} signal names")
        if len(set(signals)) != len(signals):
            raise DatasetError("duplicate signal names")
        y = np.asarray(self.y)
        w = np.asarray(self.w, dtype=np.float64)
        if y.shape != (n,) or w.shape != (n,):
            raise DatasetError("X, y and w disagree on row count")
        if n and not np.isin(y, (0, 1)).all():
            raise DatasetError("class labels must be 0 or 1")
        if n and not (np.all(w > 0) and np.all(np.isfinite(w))):
            raise DatasetError("weights must be positive and finite")
        if np.isnan(X).any():
            raise DatasetError("NaN feature value")
        if self.discrete and n and not np.isin(X, (LOW, HIGH)).all():
            raise DatasetError("discrete dataset holds values other than Low/High")
        object.__setattr__(self, "X", _frozen(X, np.float64))
        object.__setattr__(self, "y", _frozen(y, np.int64))
        object.__setattr__(self, "w", _frozen(w, np.float64))
        object.__setattr__(self, "signals", signals)
        object.__setattr__(self, "provenance", dict(self.provenance))
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def total_weight(self) -> float:
        return float(self.w.sum())

    def class_weight(self, label: int) -> float:
        return float(self.w[self.y == label].sum())

    def class_count(self, label: int) -> int:
        return int(np.count_nonzero(self.y == label))

    @property
    def positive_rate(self) -> float:
        return self.class_count(1) / len(self) if len(self) else 0.0

    def rows(self) -> Iterator[InstanceRow]:
        for i in range(len(self)):
            yield self.row(i)

    def row(self, i) -> InstanceRow:
        feats = self.X[i]
        if self.discrete:
            feats = feats.astype(np.int64)
        return InstanceRow(tuple(feats.tolist()), int(self.y[i]), float(self.w[i]))

    def subset(self, idx) -> "WeightedDataset":
        idx = np.asarray(idx)
        return self.replace(X=self.X[idx], y=self.y[idx], w=self.w[idx])

    def replace(self, **changes) -> "WeightedDataset":
        kw = dict(X=self.X, y=self.y, w=self.w, signals=self.signals,
                  class_name=self.class_name, provenance=self.provenance,
                  discrete=self.discrete, meta=self.meta)
        kw.update(changes)
        return WeightedDataset(**kw)

    def with_meta(self, **extra) -> "WeightedDataset":
        return self.replace(meta={**self.meta, **extra})

    def column(self, signal: str) -> np.ndarray:
        return self.X[:, self.signals.index(signal)]

    @classmethod
    def from_rows(cls, rows: Sequence[InstanceRow], signals, **kw) -> "WeightedDataset":
        rows = list(rows)
        X = np.array([r.features for r in rows], dtype=np.float64).reshape(len(rows), len(signals))
        return cls(X, [r.class_label for r in rows], [r.weight for r in rows],
                   signals=tuple(signals), **kw)


# --------------------------------------------------------------------------
# discretization

@dataclass(frozen=True)
class Discretizer:
    """Per-signal threshold; ``value <= threshold`` is Low, above is High."""

    cut_points: Mapping[str, float]
    labels: tuple = BIN_LABELS

    def bin(self, signal: str, values) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) > self.cut_points[signal]).astype(np.int64)


def weighted_median(values, weights) -> float:
    """Lower weighted median: smallest v whose cumulative weight reaches half."""
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    i = int(np.searchsorted(cum, cum[-1] / 2.0, side="left"))
    return float(values[order][min(i, len(values) - 1)])


def _entropy(p):
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def best_entropy_split(values, labels, weights):
    """(threshold, information gain) of the best single binary split.

    Candidates sit midway between consecutive distinct values; a constant
    column yields (value, 0.0).
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    v, yl, wt = values[order], labels[order], weights[order]
    total = wt.sum()
    pos_total = wt[yl == 1].sum()
    base = _entropy(np.array([pos_total, total - pos_total]) / total)
    distinct = np.flatnonzero(v[1:] != v[:-1])  # last index of each run
    if not len(distinct):
        return float(v[0]), 0.0
    cum_w = np.cumsum(wt)[distinct]
    cum_pos = np.cumsum(np.where(yl == 1, wt, 0.0))[distinct]
    best_gain, best_thr = -1.0, float(v[0])
    for lw, lp, i in zip(cum_w, cum_pos, distinct):
        rw, rp = total - lw, pos_total - lp
        cond = (lw / total) * _entropy(np.array([lp, lw - lp]) / lw) + \
               (rw / total) * _entropy(np.array([rp, rw - rp]) / rw)
        gain = base - cond
        if gain > best_gain + 1e-15:
            a, b = v[i], v[i + 1]
            mid = a + (b - a) / 2.0
            best_gain, best_thr = gain, (a if mid >= b else mid)
    return float(best_thr), float(max(best_gain, 0.0))


def mdl_accepts(values, labels, weights, threshold: float, gain: float) -> bool:
    """Fayyad-Irani MDL test for one binary split.

    The split is kept when its information gain exceeds
    (log2(N - 1) + log2(3^k - 2) - k*H + k1*H1 + k2*H2) / N, with N the total
    weight and k, k1, k2 the number of classes present overall and per side.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels)
    weights = np.asarray(weights, dtype=np.float64)
    n = weights.sum()
    if n <= 1 or gain <= 0:
        return False

    def part(mask):
        w = weights[mask]
        pos = w[labels[mask] == 1].sum()
        counts = np.array([pos, w.sum() - pos])
        k = int(np.count_nonzero(counts > 0))
        return k, (_entropy(counts / counts.sum()) if counts.sum() > 0 else 0.0)

    k, h = part(np.ones(len(values), dtype=bool))
    k1, h1 = part(values <= threshold)
    k2, h2 = part(values > threshold)
    delta = math.log2(3 ** k - 2) - (k * h - k1 * h1 - k2 * h2)
    return gain > (math.log2(n - 1) + delta) / n


def fit_discretizer(train: WeightedDataset, strategy: str = "median") -> Discretizer:
    """Cut points per signal: ``median`` (weighted lower median), ``entropy``
    (best information-gain split) or ``mdl`` (the entropy split only when it
    passes the MDL test, otherwise +inf so the column collapses to Low)."""
    if len(train) == 0:
        raise DatasetError("cannot fit a discretizer on an empty dataset")
    if train.discrete:
        return Discretizer({s: 0.0 for s in train.signals})
    cuts = {}
    for j, s in enumerate(train.signals):
        col = train.X[:, j]
        if strategy == "median":
            cuts[s] = weighted_median(col, train.w)
        elif strategy == "entropy":
            cuts[s] = best_entropy_split(col, train.y, train.w)[0]
        elif strategy == "mdl":
            thr, gain = best_entropy_split(col, train.y, train.w)
            cuts[s] = thr if mdl_accepts(col, train.y, train.w, thr, gain) else math.inf
        else:
            raise DatasetError(f"unknown discretization strategy {strategy!r}")
    return Discretizer(cuts)


def apply_discretizer(d: Discretizer, ds: WeightedDataset) -> WeightedDataset:
    if ds.discrete:
        return ds
    if set(d.cut_points) != set(ds.signals):
        raise DatasetError(f"schema mismatch: discretizer has {sorted(d.cut_points)}, "
                           f"dataset has {sorted(ds.signals)}")
    cuts = np.array([d.cut_points[s] for s in ds.signals])
    return ds.replace(X=(ds.X > cuts).astype(np.float64), discrete=True)


# --------------------------------------------------------------------------
# files

def _fmt(v: float) -> str:
    return repr(float(v))


def write_dataset(ds: WeightedDataset, path, *, sidecar: bool = True):
    """CSV ``signal_1,...,signal_n,class,weight`` plus ``<path>.meta``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ds.signals, ds.class_name, "weight"])
        for i in range(len(ds)):
            feats = ([BIN_LABELS[int(v)] for v in ds.X[i]] if ds.discrete
                     else [_fmt(v) for v in ds.X[i]])
            w.writerow([*feats, int(ds.y[i]), _fmt(ds.w[i])])
    if sidecar:
        write_metadata(metadata_for(ds), str(path) + ".meta")


def metadata_for(ds: WeightedDataset) -> dict:
    meta = {k: ds.provenance.get(k, "") for k in ("attack_type", "t_x", "t_g")}
    meta.update({k: v for k, v in ds.provenance.items() if k not in meta})
    meta["row_count"] = len(ds)
    meta["positive_rate"] = repr(ds.positive_rate)
    meta["total_weight"] = repr(ds.total_weight)
    for k, v in ds.meta.items():
        meta[k] = repr(v) if isinstance(v, float) else v
    return meta


def write_metadata(meta: Mapping, path):
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={v}\n")


def read_metadata(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DatasetError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def read_dataset(path, *, provenance: Mapping[str, str] = None) -> WeightedDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        has_weight = header[-1] == "weight"
        ncls = len(header) - (2 if has_weight else 1)
        if ncls < 1:
            raise DatasetError(f"{path}:1: header needs at least one signal and a class column")
        signals, class_name = header[:ncls], header[ncls]
        rows, labels, weights = [], [], []
        discrete = None
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != len(header):
                raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
            feats = [f.strip() for f in fields[:ncls]]
            is_disc = all(f in BIN_LABELS for f in feats)
            if discrete is None:
                discrete = is_disc
            try:
                if discrete:
                    if not is_disc:
                        raise ValueError("mixed Low/High and numeric values")
                    vals = [float(BIN_LABELS.index(f)) for f in feats]
                else:
                    vals = [float(f) for f in feats]
                lab = int(fields[ncls].strip())
                wt = float(fields[ncls + 1]) if has_weight else 1.0
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            if lab not in (0, 1):
                raise DatasetError(f"{path}:{lineno}: class must be 0 or 1, got {lab}")
            if not (wt > 0 and math.isfinite(wt)):
                raise DatasetError(f"{path}:{lineno}: weight must be positive, got {wt}")
            if any(math.isnan(v) for v in vals):
                raise DatasetError(f"{path}:{lineno}: NaN feature value")
            rows.append(vals)
            labels.append(lab)
            weights.append(wt)
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(signals))
    prov = dict(provenance or {})
    if provenance is None:
        try:
            meta = read_metadata(str(path) + ".meta")
            prov = {k: meta[k] for k in ("attack_type", "t_x", "t_g") if meta.get(k)}
        except FileNotFoundError:
            pass
    return WeightedDataset(X, np.array(labels, dtype=np.int64), np.array(weights),
                           signals=tuple(signals), class_name=class_name,
                           provenance=prov, discrete=bool(discrete))
