"""Cross-validated evaluation: folds, filtered training, AUC, t-tests, CFS
and the full (attack type, filter, t_x, t_g) sweep."""

from __future__ import annotations

import csv
import heapq
import logging
import math
import os
import warnings
import zlib
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .bayesnet import importance_report, predict_scores, train_classifier
from .dataset import WeightedDataset, apply_discretizer, fit_discretizer
from .resampling import (SmotePPConfig, balancing_percent, smote, smote_pp,
                         spread_subsample)
from .timeline import EventIndex, GranularityPair, build_dataset

log = logging.getLogger(__name__)


class EvaluationError(ValueError):
    pass


# --------------------------------------------------------------------------
# plan and folds

@dataclass(frozen=True)
class CvPlan:
    folds: int = 10
    repetitions: int = 10
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if self.folds < 2:
            raise EvaluationError("folds must be >= 2")
        if self.repetitions < 1:
            raise EvaluationError("repetitions must be >= 1")

    @property
    def test_train_ratio(self) -> float:
        return 1.0 / (self.folds - 1)


def stratified_folds(ds, plan: CvPlan) -> list:
    """Per repetition, a list of ``(train_idx, test_idx)`` pairs.

    Each repetition reshuffles with its own seed, orders the shuffled rows
    minority-first and deals them round-robin, so every fold gets its share
    of each class within one row.
    """
    y = ds.y if isinstance(ds, WeightedDataset) else np.asarray(ds)
    n = len(y)
    if n < plan.folds:
        raise EvaluationError(f"{n} rows cannot fill {plan.folds} folds")
    if plan.stratified:
        counts = np.bincount(y, minlength=2)
        if counts[counts > 0].min() < plan.folds:
            warnings.warn(f"only {counts[counts > 0].min()} rows of the rarer class for "
                          f"{plan.folds} folds; stratification is best effort", RuntimeWarning,
                          stacklevel=2)
    out = []
    for rep in range(plan.repetitions):
        rng = np.random.default_rng(np.random.SeedSequence([plan.seed, rep]))
        perm = rng.permutation(n)
        if plan.stratified:
            minority = 1 if np.count_nonzero(y == 1) <= np.count_nonzero(y == 0) else 0
            perm = perm[np.argsort(y[perm] != minority, kind="stable")]
        fold_of = np.empty(n, dtype=np.int64)
        fold_of[perm] = np.arange(n) % plan.folds
        out.append([(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f))
                    for f in range(plan.folds)])
    return out


# --------------------------------------------------------------------------
# AUC and significance

def auc(scores, labels, weights=None) -> float:
    """Weighted Mann-Whitney AUC: ties between a positive and a negative
    count half, each pair weighted by the product of its row weights."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    w = np.ones(len(s)) if weights is None else np.asarray(weights, dtype=np.float64)
    if not (len(s) == len(y) == len(w)):
        raise EvaluationError("scores, labels and weights differ in length")
    order = np.argsort(s, kind="stable")
    acc, wp, wn = kernels.auc_sorted(np.ascontiguousarray(s[order]),
                                     np.ascontiguousarray(y[order]),
                                     np.ascontiguousarray(w[order]))
    if wp <= 0 or wn <= 0:
        raise EvaluationError("AUC is undefined unless both classes are present")
    return acc / (wp * wn)


@dataclass(frozen=True)
class Comparison:
    t_statistic: float
    p_value: float
    significant: bool
    mean_a: float = float("nan")
    mean_b: float = float("nan")


def compare(a, b, method: str = "corrected_resampled_t", test_train_ratio: float = 1 / 9,
            alpha: float = 0.05) -> Comparison:
    """Two-tailed paired t-test of ``a - b``.

    ``corrected_resampled_t`` scales the variance of the mean difference
    by (1/n + n_test/n_train) instead of 1/n, since CV folds overlap.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise EvaluationError("compare needs equal-length paired samples")
    n = len(a)
    if n < 2:
        raise EvaluationError("compare needs at least two pairs")
    d = a - b
    mean = float(d.mean())
    var = float(d.var(ddof=1))
    if method == "paired_t":
        scale = 1.0 / n
    elif method == "corrected_resampled_t":
        scale = 1.0 / n + test_train_ratio
    else:
        raise EvaluationError(f"unknown comparison method {method!r}")
    if var == 0.0:
        if mean == 0.0:
            return Comparison(0.0, 1.0, False, float(a.mean()), float(b.mean()))
        return Comparison(math.copysign(math.inf, mean), 0.0, True, float(a.mean()), float(b.mean()))
    t = mean / math.sqrt(var * scale)
    p = float(2.0 * stats.t.sf(abs(t), n - 1))
    return Comparison(float(t), p, p < alpha, float(a.mean()), float(b.mean()))


# --------------------------------------------------------------------------
# filters and classifier

FILTER_NAMES = ("none", "smote", "spread", "smote_pp")
FILTER_SHORT = {"none": "B", "smote": "S", "spread": "SS", "smote_pp": "S++"}


@dataclass(frozen=True)
class FilterSpec:
    """A rebalancing filter plus its parameters.

    smote: ``percent`` (None balances the classes), ``k``;
    spread: ``ratio``; smote_pp: ``p``, ``k2``, ``kmeans_max_iter``.
    """

    name: str = "none"
    params: tuple = ()

    def __post_init__(self):
        if self.name not in FILTER_NAMES:
            raise EvaluationError(f"unknown filter {self.name!r}")
        items = self.params.items() if isinstance(self.params, Mapping) else self.params
        object.__setattr__(self, "params", tuple(sorted(items)))

    def param(self, key, default):
        return dict(self.params).get(key, default)

    def apply(self, train: WeightedDataset, seed: int) -> WeightedDataset:
        if self.name == "none":
            return train
        if self.name == "smote":
            pct = self.param("percent", None)
            return smote(train, balancing_percent(train) if pct is None else pct,
                         int(self.param("k", 5)), seed)
        if self.name == "spread":
            return spread_subsample(train, float(self.param("ratio", 1.0)), seed)
        cfg = SmotePPConfig(p=float(self.param("p", 20.0)), k2=int(self.param("k2", 5)),
                            kmeans_max_iter=int(self.param("kmeans_max_iter", 100)), seed=seed)
        return smote_pp(train, cfg)


def default_filters() -> list:
    return [FilterSpec(n) for n in FILTER_NAMES]


@dataclass(frozen=True)
class ClassifierConfig:
    strategy: str = "naive"
    alpha: float = 0.5
    max_parents: int = 2
    discretization: str = "median"


def fit_pipeline(train: WeightedDataset, filt: FilterSpec, clf: ClassifierConfig, seed: int):
    """Filter the training rows, fit cut points on them, then the network."""
    filtered = filt.apply(train, seed)
    disc = fit_discretizer(filtered, clf.discretization)
    dtrain = apply_discretizer(disc, filtered)
    return train_classifier(dtrain, strategy=clf.strategy, alpha=clf.alpha,
                            max_parents=clf.max_parents, discretizer=disc)


def fold_seed(plan_seed: int, key: str, rep: int, fold: int) -> int:
    ss = np.random.SeedSequence([plan_seed, zlib.crc32(key.encode()), rep, fold])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass
class FoldScores:
    aucs: np.ndarray
    folds: list  # (rep, fold) of each auc
    invalid: list = field(default_factory=list)  # (rep, fold, reason)
    models: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(self.aucs.mean()) if len(self.aucs) else float("nan")


def filtered_evaluate(ds: WeightedDataset, filt: FilterSpec = FilterSpec(),
                      clf: ClassifierConfig = ClassifierConfig(), plan: CvPlan = CvPlan(),
                      *, key: str = "", keep_models: bool = False,
                      fold_plan: list = None) -> FoldScores:
    """AUC of every fold; filters and cut points only ever see training rows."""
    if ds.discrete:
        raise EvaluationError("filtered_evaluate expects raw (numeric) rows")
    splits = fold_plan if fold_plan is not None else stratified_folds(ds, plan)
    aucs, where, invalid, models = [], [], [], []
    for rep, folds in enumerate(splits):
        for f, (tr, te) in enumerate(folds):
            train, test = ds.subset(tr), ds.subset(te)
            try:
                model = fit_pipeline(train, filt, clf, fold_seed(plan.seed, key, rep, f))
                value = auc(predict_scores(model, test), test.y, test.w)
            except (ValueError, ArithmeticError) as exc:
                invalid.append((rep, f, str(exc)))
                continue
            aucs.append(value)
            where.append((rep, f))
            if keep_models:
                models.append(model)
    return FoldScores(np.array(aucs), where, invalid, models)


# --------------------------------------------------------------------------
# correlation-based feature selection

def _entropy_of(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def symmetrical_uncertainty(a, b, w=None) -> float:
    """2 * I(a; b) / (H(a) + H(b)) for discrete codes, weighted."""
    a = np.asarray(a).astype(np.int64)
    b = np.asarray(b).astype(np.int64)
    w = np.ones(len(a)) if w is None else np.asarray(w, dtype=np.float64)
    na, nb = a.max() + 1, b.max() + 1
    joint = np.bincount(a * nb + b, weights=w, minlength=na * nb).reshape(na, nb)
    ha, hb = _entropy_of(joint.sum(axis=1)), _entropy_of(joint.sum(axis=0))
    if ha + hb == 0:
        return 0.0
    hab = _entropy_of(joint.ravel())
    return max(0.0, 2.0 * (ha + hb - hab) / (ha + hb))


def cfs_merit(subset, r_cf, r_ff) -> float:
    k = len(subset)
    if k == 0:
        return 0.0
    idx = list(subset)
    rcf = float(np.mean(r_cf[idx]))
    if k == 1:
        rff = 0.0
    else:
        sub = r_ff[np.ix_(idx, idx)]
        rff = float(sub[np.triu_indices(k, 1)].mean())
    return k * rcf / math.sqrt(k + k * (k - 1) * rff)


def best_first_cfs(r_cf, r_ff, max_stale: int = 5) -> tuple:
    """Forward best-first search over feature subsets maximizing CFS merit.

    Stops after ``max_stale`` consecutive expansions without a strictly
    better subset. Returns the best subset as a sorted tuple.
    """
    n = len(r_cf)
    start = ()
    best, best_merit = start, 0.0
    heap = [(-0.0, start)]
    seen = {start}
    stale = 0
    while heap and stale < max_stale:
        _, node = heapq.heappop(heap)
        improved = False
        for j in range(n):
            if j in node:
                continue
            child = tuple(sorted((*node, j)))
            if child in seen:
                continue
            seen.add(child)
            m = cfs_merit(child, r_cf, r_ff)
            heapq.heappush(heap, (-m, child))
            if m > best_merit + 1e-12:
                best, best_merit, improved = child, m, True
        stale = 0 if improved else stale + 1
    return best


def cfs_select(ds: WeightedDataset, plan: CvPlan = CvPlan(), *, measure: str = "su",
               repetitions: int = 1, max_stale: int = 5, discretization: str = "mdl") -> dict:
    """How many training folds select each signal (0..folds*repetitions)."""
    counts = {s: 0 for s in ds.signals}
    splits = stratified_folds(ds, CvPlan(plan.folds, repetitions, plan.seed, plan.stratified))
    for folds in splits:
        for tr, _ in folds:
            train = ds.subset(tr)
            if measure == "su":
                if not train.discrete:
                    train = apply_discretizer(fit_discretizer(train, discretization), train)
                cols = [train.X[:, j] for j in range(train.X.shape[1])]
                r_cf = np.array([symmetrical_uncertainty(c, train.y, train.w) for c in cols])
                r_ff = np.array([[symmetrical_uncertainty(a, b, train.w) for b in cols]
                                 for a in cols])
            elif measure == "pearson":
                M = np.column_stack([train.X, train.y])
                with np.errstate(invalid="ignore", divide="ignore"):
                    C = np.nan_to_num(np.abs(np.corrcoef(M, rowvar=False)))
                r_cf, r_ff = C[:-1, -1], C[:-1, :-1]
            else:
                raise EvaluationError(f"unknown CFS measure {measure!r}")
            for j in best_first_cfs(r_cf, r_ff, max_stale):
                counts[ds.signals[j]] += 1
    return counts


# --------------------------------------------------------------------------
# sweep

@dataclass
class CellResult:
    attack_type: str
    filter: str
    t_x: str
    t_g: str
    n_rows: int
    positive_density: float
    fold_aucs: np.ndarray
    n_invalid: int = 0
    variable: bool = False
    best: bool = False

    @property
    def mean_auc(self) -> float:
        return float(self.fold_aucs.mean()) if len(self.fold_aucs) else float("nan")

    @property
    def key(self) -> tuple:
        return (self.attack_type, self.filter, self.t_x, self.t_g)


@dataclass
class ComparisonRow:
    attack_type: str
    t_x: str
    t_g: str
    filter_a: str
    filter_b: str
    method: str
    result: Comparison


@dataclass
class EvalReport:
    cells: list
    comparisons: list = field(default_factory=list)
    importance: dict = field(default_factory=dict)  # attack -> (t_x, t_g, CptReport)
    cfs: dict = field(default_factory=dict)  # attack -> (t_x, t_g, counts, n_folds)

    def cell(self, attack_type, filt, t_x, t_g) -> CellResult:
        for c in self.cells:
            if c.key == (attack_type, filt, t_x, t_g):
                return c
        raise KeyError((attack_type, filt, t_x, t_g))

    def best_cell(self, attack_type=None, filt=None) -> CellResult:
        cands = [c for c in self.cells if (attack_type is None or c.attack_type == attack_type)
                 and (filt is None or c.filter == filt) and len(c.fold_aucs)]
        return max(cands, key=lambda c: c.mean_auc)


_SHARED: dict = {}


def _eval_dataset_job(job):
    """Evaluate every filter on one (attack, pair) dataset."""
    attack, pair = job
    sh = _SHARED
    ds = build_dataset(sh["index"], attack, pair, sh["gt_start"], sh["gt_end"],
                       signal_names=sh["signals"], per_day=sh["per_day"])
    splits = stratified_folds(ds, sh["plan"])
    out = []
    for filt in sh["filters"]:
        key = f"{attack}|{filt.name}|{pair.tx_label}|{pair.t_g.label}"
        fs = filtered_evaluate(ds, filt, sh["clf"], sh["plan"], key=key, fold_plan=splits)
        for rep, f, reason in fs.invalid:
            log.warning("cell %s fold %d/%d invalid: %s", key, rep, f, reason)
        out.append(CellResult(attack, filt.name, pair.tx_label, pair.t_g.label, len(ds),
                              ds.positive_rate, fs.aucs, len(fs.invalid),
                              variable=bool(pair.per_signal_tx)))
    return out


def _run_jobs(jobs, workers, progress):
    results = []
    if workers > 1 and len(jobs) > 1:
        import multiprocessing as mp
        from concurrent.futures import ProcessPoolExecutor
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(workers, mp_context=ctx) as pool:
            for i, r in enumerate(pool.map(_eval_dataset_job, jobs)):
                results.append(r)
                if progress:
                    progress(i + 1, len(jobs))
    else:
        for i, job in enumerate(jobs):
            results.append(_eval_dataset_job(job))
            if progress:
                progress(i + 1, len(jobs))
    return [c for r in results for c in r]


def _fit_full(ds: WeightedDataset, clf: ClassifierConfig):
    disc = fit_discretizer(ds, clf.discretization)
    return train_classifier(apply_discretizer(disc, ds), strategy=clf.strategy, alpha=clf.alpha,
                            max_parents=clf.max_parents, discretizer=disc)


def _variable_tx_pair(index, attack, base: GranularityPair, tx_options, sh) -> GranularityPair | None:
    """Per signal, the t_x whose CPTs discriminate best at base.t_g."""
    scores = {}
    for tx in tx_options:
        ds = build_dataset(index, attack, GranularityPair(tx, base.t_g), sh["gt_start"],
                           sh["gt_end"], signal_names=sh["signals"], per_day=sh["per_day"])
        try:
            rep = importance_report(_fit_full(ds, sh["clf"]))
        except ValueError:
            continue
        for si in rep.signals:
            scores.setdefault(si.signal, []).append((si.score, tx))
    overrides = {}
    for s, opts in scores.items():
        base_score = next((sc for sc, tx in opts if tx == base.t_x), -1.0)
        sc, tx = max(opts, key=lambda o: o[0])
        if tx != base.t_x and sc > base_score:
            overrides[s] = tx
    if not overrides:
        return None
    return GranularityPair(base.t_x, base.t_g, overrides)


def sweep(events, attack_types: Sequence[str], grid: Sequence[GranularityPair],
          filters: Sequence[FilterSpec] = None, plan: CvPlan = CvPlan(), *,
          gt_start, gt_end, clf: ClassifierConfig = ClassifierConfig(),
          signals: Sequence[str] = None, per_day: bool = True, workers: int = 1,
          comparison_method: str = "corrected_resampled_t", variable_tx: bool = True,
          cfs_repetitions: int = 1, progress: Callable = None) -> EvalReport:
    """Evaluate every filter on every (attack type, t_x, t_g) dataset.

    Output is identical for any ``workers``: jobs carry their own seeds and
    results are collected in submission order.
    """
    index = events if isinstance(events, EventIndex) else EventIndex(events)
    filters = list(filters) if filters else default_filters()
    signal_names = list(signals or index.signals)
    _SHARED.clear()
    _SHARED.update(index=index, gt_start=gt_start, gt_end=gt_end, signals=signal_names,
                   per_day=per_day, plan=plan, filters=filters, clf=clf)
    jobs = [(a, p) for a in attack_types for p in grid]
    cells = _run_jobs(jobs, workers, progress)
    base_filter = filters[0].name

    if variable_tx:
        tx_options = sorted({p.t_x for p in grid}, key=lambda d: d.nominal_days)
        extra = []
        for a in attack_types:
            best = _best(cells, a, base_filter)
            if best is None:
                continue
            pair = next(p for p in grid if p.tx_label == best.t_x and p.t_g.label == best.t_g)
            vpair = _variable_tx_pair(index, a, pair, tx_options, _SHARED)
            if vpair is not None:
                extra.append((a, vpair))
        cells += _run_jobs(extra, workers, None)

    for a in attack_types:
        for f in filters:
            b = _best(cells, a, f.name)
            if b is not None:
                b.best = True

    comparisons = _comparisons(cells, filters, plan, comparison_method)

    importance, cfs = {}, {}
    for a in attack_types:
        best = _best(cells, a, base_filter, fixed_only=True)
        if best is None:
            continue
        pair = next((p for p in grid if p.tx_label == best.t_x and p.t_g.label == best.t_g), None)
        if pair is None:
            continue
        ds = build_dataset(index, a, pair, gt_start, gt_end, signal_names=signal_names,
                           per_day=per_day)
        try:
            importance[a] = (best.t_x, best.t_g, importance_report(_fit_full(ds, clf)))
            counts = cfs_select(ds, plan, repetitions=cfs_repetitions)
            cfs[a] = (best.t_x, best.t_g, counts, plan.folds * cfs_repetitions)
        except ValueError as exc:
            log.warning("importance for %s skipped: %s", a, exc)
    return EvalReport(cells, comparisons, importance, cfs)


def _best(cells, attack, filt, fixed_only=False):
    cands = [c for c in cells if c.attack_type == attack and c.filter == filt
             and len(c.fold_aucs) and not (fixed_only and c.variable)]
    if not cands:
        return None
    return max(cands, key=lambda c: c.mean_auc)


def _comparisons(cells, filters, plan, method):
    names = [f.name for f in filters]
    pairs = [(f, names[0]) for f in names[1:]]
    if "smote_pp" in names:
        pairs += [("smote_pp", f) for f in names[1:] if f != "smote_pp"]
    by_key = {c.key: c for c in cells}
    out = []
    seen = set()
    for c in cells:
        cell_id = (c.attack_type, c.t_x, c.t_g)
        if cell_id in seen:
            continue
        seen.add(cell_id)
        for fa, fb in pairs:
            ca = by_key.get((c.attack_type, fa, c.t_x, c.t_g))
            cb = by_key.get((c.attack_type, fb, c.t_x, c.t_g))
            if ca is None or cb is None or len(ca.fold_aucs) != len(cb.fold_aucs) \
                    or len(ca.fold_aucs) < 2:
                continue
            res = compare(ca.fold_aucs, cb.fold_aucs, method, plan.test_train_ratio)
            out.append(ComparisonRow(c.attack_type, c.t_x, c.t_g, fa, fb, method, res))
    return out


# --------------------------------------------------------------------------
# report files

def _f(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


CELL_FIELDS = ("attack_type", "filter", "t_x", "t_g", "variable", "n_rows", "positive_density",
               "mean_auc", "std_auc", "n_folds", "n_invalid", "best")
COMPARISON_FIELDS = ("attack_type", "t_x", "t_g", "filter_a", "filter_b", "method", "mean_a",
                     "mean_b", "t_statistic", "p_value", "significant")


def write_report(report: EvalReport, outdir) -> list:
    """Write cells, folds, comparisons, importance, CFS and plot-data CSVs."""
    os.makedirs(outdir, exist_ok=True)
    plots = os.path.join(outdir, "plots")
    os.makedirs(plots, exist_ok=True)
    written = []

    def path(*parts):
        p = os.path.join(outdir, *parts)
        written.append(p)
        return p

    _write_csv(path("cells.csv"), CELL_FIELDS, [
        (c.attack_type, c.filter, c.t_x, c.t_g, int(c.variable), c.n_rows,
         _f(c.positive_density), _f(c.mean_auc),
         _f(c.fold_aucs.std(ddof=1)) if len(c.fold_aucs) > 1 else "nan",
         len(c.fold_aucs), c.n_invalid, int(c.best)) for c in report.cells])
    _write_csv(path("folds.csv"), ("attack_type", "filter", "t_x", "t_g", "index", "auc"), [
        (c.attack_type, c.filter, c.t_x, c.t_g, i, _f(v))
        for c in report.cells for i, v in enumerate(c.fold_aucs)])
    _write_csv(path("comparisons.csv"), COMPARISON_FIELDS, [
        (r.attack_type, r.t_x, r.t_g, r.filter_a, r.filter_b, r.method, _f(r.result.mean_a),
         _f(r.result.mean_b), _f(r.result.t_statistic), _f(r.result.p_value),
         int(r.result.significant)) for r in report.comparisons])
    imp_rows = []
    for a, (tx, tg, rep) in report.importance.items():
        for rank, si in enumerate(rep.ranked(), start=1):
            imp_rows.append((a, tx, tg, si.signal, _f(si.p_high_attack), _f(si.p_low_attack),
                             _f(si.p_high_no_attack), _f(si.p_low_no_attack), _f(si.score),
                             int(si.dependent), rank))
    _write_csv(path("importance.csv"),
               ("attack_type", "t_x", "t_g", "signal", "p_high_attack", "p_low_attack",
                "p_high_no_attack", "p_low_no_attack", "score", "dependent", "rank"), imp_rows)
    _write_csv(path("cfs.csv"), ("attack_type", "t_x", "t_g", "signal", "count", "folds"), [
        (a, tx, tg, s, n, nf) for a, (tx, tg, counts, nf) in report.cfs.items()
        for s, n in counts.items()])

    fixed = [c for c in report.cells if not c.variable]
    attacks = list(dict.fromkeys(c.attack_type for c in fixed))
    filters = list(dict.fromkeys(c.filter for c in fixed))
    for a in attacks:
        cs = [c for c in fixed if c.attack_type == a]
        txs = list(dict.fromkeys(c.t_x for c in cs))
        tgs = list(dict.fromkeys(c.t_g for c in cs))
        by = {c.key: c for c in cs}
        base = filters[0]
        rows = []
        for i, tx in enumerate(txs):
            rows.append([i, tx] + [_f(by[(a, base, tx, tg)].mean_auc) if (a, base, tx, tg) in by
                                   else "" for tg in tgs])
        _write_csv(path("plots", f"auc_by_tg_{a}.csv"), ["t_x_ordinal", "t_x", *tgs], rows)
        rows = []
        for tg in tgs:
            for i, tx in enumerate(txs):
                row = [tg, i, tx]
                dens = ""
                for f in filters:
                    c = by.get((a, f, tx, tg))
                    row.append(_f(c.mean_auc) if c else "")
                    if c:
                        dens = _f(c.positive_density)
                rows.append(row + [dens])
        _write_csv(path("plots", f"filters_{a}.csv"), ["t_g", "t_x_ordinal", "t_x", *filters,
                                                       "density"], rows)
    return written


def read_csv_rows(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
