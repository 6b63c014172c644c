"""Discrete Bayesian-network classifier over binary (Low/High) signals.

CPTs are numpy arrays indexed ``cpt[parent_1, ..., parent_k, value]``.
Inference is exact enumeration; networks here have at most a handful of
binary nodes so the 2**n sum is cheap.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dataset import DatasetError, Discretizer, WeightedDataset, apply_discretizer

ARITY = 2
FORMAT_TAG = "cyberforecast-bayesnet 1"


class BayesNetError(ValueError):
    pass


class ImpossibleEvidenceError(BayesNetError):
    pass


def topological_order(nodes, parents: Mapping[str, tuple]) -> list:
    """Nodes ordered parents-first; raises on a cycle."""
    order, state = [], {}

    def visit(v, stack):
        s = state.get(v)
        if s == 1:
            raise BayesNetError(f"cycle through {' -> '.join([*stack, v])}")
        if s == 2:
            return
        state[v] = 1
        for p in parents.get(v, ()):
            if p not in nodes:
                raise BayesNetError(f"parent {p!r} of {v!r} is not a node")
            visit(p, [*stack, v])
        state[v] = 2
        order.append(v)

    for v in nodes:
        visit(v, [])
    return order


def is_acyclic(nodes, parents) -> bool:
    try:
        topological_order(nodes, parents)
    except BayesNetError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class BayesNetModel:
    nodes: tuple
    parents: Mapping[str, tuple]
    cpts: Mapping[str, np.ndarray]
    class_node: str = "class"
    discretizer: Discretizer | None = None
    _order: tuple = field(default=(), repr=False)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        parents = {v: tuple(self.parents.get(v, ())) for v in nodes}
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "_order", tuple(topological_order(nodes, parents)))
        cpts = {}
        for v in nodes:
            if v not in self.cpts:
                raise BayesNetError(f"missing CPT for {v!r}")
            t = np.array(self.cpts[v], dtype=np.float64)
            want = (ARITY,) * (len(parents[v]) + 1)
            if t.shape != want:
                raise BayesNetError(f"CPT for {v!r} has shape {t.shape}, expected {want}")
            if (t < 0).any() or not np.allclose(t.sum(axis=-1), 1.0, rtol=0, atol=1e-9):
                raise BayesNetError(f"CPT rows for {v!r} must be non-negative and sum to 1")
            t.setflags(write=False)
            cpts[v] = t
        object.__setattr__(self, "cpts", cpts)

    @property
    def signals(self) -> tuple:
        return tuple(v for v in self.nodes if v != self.class_node)

    @property
    def edges(self) -> list:
        return [(p, v) for v in self.nodes for p in self.parents[v]]


# --------------------------------------------------------------------------
# structure and parameters

def _check_training(train: WeightedDataset):
    if not train.discrete:
        raise BayesNetError("training data must be discretized first")
    if len(train) == 0:
        raise BayesNetError("empty training set")
    for c in (0, 1):
        if not (train.y == c).any():
            raise BayesNetError(f"class {c} absent from training data")


def _columns(train: WeightedDataset) -> dict:
    cols = {s: train.X[:, j].astype(np.int64) for j, s in enumerate(train.signals)}
    cols[train.class_name] = train.y.astype(np.int64)
    return cols


def _family_counts(cols, weights, node, parents) -> np.ndarray:
    """Weighted counts shaped (2,)*len(parents) + (2,)."""
    idx = np.zeros(len(weights), dtype=np.int64)
    for p in parents:
        idx = idx * ARITY + cols[p]
    idx = idx * ARITY + cols[node]
    size = ARITY ** (len(parents) + 1)
    return np.bincount(idx, weights=weights, minlength=size).reshape((ARITY,) * (len(parents) + 1))


def family_score(cols, weights, node, parents) -> float:
    """Cooper-Herskovits (K2) log score of one node with uniform Dirichlet priors."""
    counts = _family_counts(cols, weights, node, parents).reshape(-1, ARITY)
    score = 0.0
    for row in counts:
        score += math.lgamma(ARITY) - math.lgamma(row.sum() + ARITY)
        score += sum(math.lgamma(c + 1.0) for c in row)
    return score


def naive_structure(train: WeightedDataset) -> dict:
    return {**{s: (train.class_name,) for s in train.signals}, train.class_name: ()}


def structure_score(train: WeightedDataset, parents: Mapping[str, tuple]) -> float:
    cols = _columns(train)
    return sum(family_score(cols, train.w, v, tuple(parents.get(v, ()))) for v in cols)


def learn_structure(train: WeightedDataset, max_parents: int = 2,
                    strategy: str = "naive") -> dict:
    """Parent map. ``naive``: the class is every signal's only parent.

    ``k2_hill_climb`` starts from the naive structure and greedily adds the
    signal->signal edge with the largest K2 score gain while a gain exists,
    never exceeding ``max_parents`` (class parent included) and never
    closing a cycle.
    """
    if max_parents < 1:
        raise BayesNetError("max_parents must be >= 1")
    _check_training(train)
    parents = naive_structure(train)
    if strategy == "naive":
        return parents
    if strategy != "k2_hill_climb":
        raise BayesNetError(f"unknown structure strategy {strategy!r}")
    cols = _columns(train)
    nodes = list(cols)
    current = {v: family_score(cols, train.w, v, parents[v]) for v in nodes}
    while True:
        best = None
        for child in train.signals:
            if len(parents[child]) >= max_parents:
                continue
            for par in train.signals:
                if par == child or par in parents[child]:
                    continue
                trial = {**parents, child: parents[child] + (par,)}
                if not is_acyclic(nodes, trial):
                    continue
                s = family_score(cols, train.w, child, trial[child])
                gain = s - current[child]
                if gain > 1e-9 and (best is None or gain > best[0]):
                    best = (gain, child, par, s)
        if best is None:
            return parents
        _, child, par, s = best
        parents[child] = parents[child] + (par,)
        current[child] = s


def fit_cpts(train: WeightedDataset, parents: Mapping[str, tuple], alpha: float = 0.5,
             discretizer: Discretizer | None = None) -> BayesNetModel:
    """CPT entry = (weighted count + alpha) / (parent-config total + 2 alpha)."""
    if alpha < 0:
        raise BayesNetError("alpha must be >= 0")
    _check_training(train)
    cols = _columns(train)
    nodes = (*train.signals, train.class_name)
    cpts = {}
    for v in nodes:
        pa = tuple(parents.get(v, ()))
        counts = _family_counts(cols, train.w, v, pa) + alpha
        totals = counts.sum(axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / ARITY)
        cpts[v] = t
    return BayesNetModel(nodes, {v: tuple(parents.get(v, ())) for v in nodes}, cpts,
                         class_node=train.class_name, discretizer=discretizer)


# --------------------------------------------------------------------------
# inference

def joint_probability(model: BayesNetModel, assignment: Mapping[str, int]) -> float:
    """Product of CPT lookups, one per node."""
    p = 1.0
    for v in model.nodes:
        if v not in assignment:
            raise BayesNetError(f"assignment lacks node {v!r}")
        key = tuple(int(assignment[q]) for q in model.parents[v]) + (int(assignment[v]),)
        p *= model.cpts[v][key]
    return float(p)


def posterior(model: BayesNetModel, evidence: Mapping[str, int], query: str) -> np.ndarray:
    """P(query | evidence) by summing the joint over all completions."""
    if query not in model.nodes:
        raise BayesNetError(f"unknown query node {query!r}")
    if query in evidence:
        raise BayesNetError("query node is part of the evidence")
    for v in evidence:
        if v not in model.nodes:
            raise BayesNetError(f"unknown evidence node {v!r}")
    hidden = [v for v in model.nodes if v != query and v not in evidence]
    dist = np.zeros(ARITY)
    assignment = dict(evidence)
    for q in range(ARITY):
        assignment[query] = q
        for values in itertools.product(range(ARITY), repeat=len(hidden)):
            assignment.update(zip(hidden, values))
            dist[q] += joint_probability(model, assignment)
    total = dist.sum()
    if total <= 0:
        raise ImpossibleEvidenceError(f"evidence {dict(evidence)} has zero probability")
    return dist / total


def _as_discrete(model: BayesNetModel, ds: WeightedDataset) -> WeightedDataset:
    if ds.discrete:
        return ds
    if model.discretizer is None:
        raise BayesNetError("numeric rows but the model carries no discretizer")
    return apply_discretizer(model.discretizer, ds)


def predict_score(model: BayesNetModel, row, signals=None) -> float:
    """P(class = 1 | all signal values of ``row``).

    ``row`` is an :class:`InstanceRow` with Low/High bins in the model's
    signal order (or ``signals`` order), or a mapping signal -> bin.
    """
    if isinstance(row, Mapping):
        evidence = {s: int(row[s]) for s in model.signals}
    else:
        names = tuple(signals) if signals is not None else model.signals
        evidence = {s: int(v) for s, v in zip(names, row.features)}
        missing = set(model.signals) - set(evidence)
        if missing:
            raise BayesNetError(f"row lacks signals {sorted(missing)}")
    return float(posterior(model, evidence, model.class_node)[1])


def predict_scores(model: BayesNetModel, ds: WeightedDataset) -> np.ndarray:
    """Vectorised :func:`predict_score` over every row of ``ds``.

    With every signal observed only the class node is summed out, so this is
    the same enumeration carried out column-wise.
    """
    ds = _as_discrete(model, ds)
    n = len(ds)
    cols = {}
    for s in model.signals:
        if s not in ds.signals:
            raise BayesNetError(f"dataset lacks signal {s!r}")
        cols[s] = ds.X[:, ds.signals.index(s)].astype(np.int64)
    joint = np.ones((ARITY, n))
    for c in range(ARITY):
        cols[model.class_node] = np.full(n, c, dtype=np.int64)
        for v in model.nodes:
            key = tuple(cols[q] for q in model.parents[v]) + (cols[v],)
            joint[c] *= model.cpts[v][key]
    total = joint.sum(axis=0)
    if n and (total <= 0).any():
        raise ImpossibleEvidenceError("a row has zero probability under the model")
    return joint[1] / total


# --------------------------------------------------------------------------
# CPT report

@dataclass(frozen=True)
class SignalImportance:
    signal: str
    p_high_attack: float
    p_low_attack: float
    p_high_no_attack: float
    p_low_no_attack: float
    score: float
    dependent: bool


@dataclass(frozen=True)
class CptReport:
    signals: tuple  # of SignalImportance, in model signal order

    def ranked(self) -> list:
        return sorted(self.signals, key=lambda s: (-s.score, s.signal))

    def __getitem__(self, name) -> SignalImportance:
        for s in self.signals:
            if s.signal == name:
                return s
        raise KeyError(name)


def importance_report(model: BayesNetModel) -> CptReport:
    """P(Low/High | attack / no attack) per signal and |P(High|1) - P(High|0)|."""
    out = []
    cls = model.class_node
    for s in model.signals:
        on = posterior(model, {cls: 1}, s)
        off = posterior(model, {cls: 0}, s)
        dependent = cls in model.parents[s] or s in model.parents[cls]
        out.append(SignalImportance(s, float(on[1]), float(on[0]), float(off[1]), float(off[0]),
                                    float(abs(on[1] - off[1])), dependent))
    return CptReport(tuple(out))


# --------------------------------------------------------------------------
# persistence

def _g(x: float) -> str:
    return format(float(x), ".17g")


def save_model(model: BayesNetModel, path):
    lines = [FORMAT_TAG, f"class {model.class_node}", "nodes " + " ".join(model.nodes)]
    for v in model.nodes:
        lines.append(" ".join(["parents", v, *model.parents[v]]))
    if model.discretizer is not None:
        for s, c in model.discretizer.cut_points.items():
            lines.append(f"cut {s} {_g(c)}")
    for v in model.nodes:
        k = len(model.parents[v])
        for cfg in itertools.product(range(ARITY), repeat=k):
            probs = model.cpts[v][cfg]
            tag = "".join(map(str, cfg)) or "-"
            lines.append(" ".join(["cpt", v, tag, *(_g(p) for p in probs)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> BayesNetModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].strip() != FORMAT_TAG:
        raise BayesNetError(f"{path}:1: not a model file")
    cls, nodes, parents, cuts, rows = None, (), {}, {}, {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        try:
            tag = parts[0]
            if tag == "class":
                cls = parts[1]
            elif tag == "nodes":
                nodes = tuple(parts[1:])
            elif tag == "parents":
                parents[parts[1]] = tuple(parts[2:])
            elif tag == "cut":
                cuts[parts[1]] = float(parts[2])
            elif tag == "cpt":
                cfg = () if parts[2] == "-" else tuple(int(ch) for ch in parts[2])
                rows[(parts[1], cfg)] = [float(p) for p in parts[3:]]
            else:
                raise ValueError(f"unknown record {tag!r}")
        except (IndexError, ValueError) as exc:
            raise BayesNetError(f"{path}:{lineno}: {exc}") from exc
    cpts = {}
    for v in nodes:
        k = len(parents.get(v, ()))
        t = np.zeros((ARITY,) * (k + 1))
        for cfg in itertools.product(range(ARITY), repeat=k):
            if (v, cfg) not in rows:
                raise BayesNetError(f"{path}: missing CPT row {v} {cfg}")
            t[cfg] = rows[(v, cfg)]
        cpts[v] = t
    return BayesNetModel(nodes, parents, cpts, class_node=cls,
                         discretizer=Discretizer(cuts) if cuts else None)


def train_classifier(train: WeightedDataset, *, strategy: str = "naive", alpha: float = 0.5,
                     max_parents: int = 2, discretizer: Discretizer | None = None) -> BayesNetModel:
    """Structure + parameters on already-discretized ``train``."""
    if not train.discrete:
        raise DatasetError("train_classifier expects discretized data")
    parents = learn_structure(train, max_parents=max_parents, strategy=strategy)
    return fit_cpts(train, parents, alpha, discretizer=discretizer)
