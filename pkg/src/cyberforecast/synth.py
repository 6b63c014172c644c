"""Synthetic event streams with planted attack dependencies.

Attacks follow a shared campaign regime (a two-state Markov chain over
days). Planted signals rise ahead of attacks: on day ``d`` their intensity
is scaled by ``1 + strength * u(d)`` where ``u(d)`` is the number of
upcoming attacks in ``(d, d + lead]``, normalized so its long-run mean is 1
for each attack type and then averaged over types.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .dataset import WeightedDataset
from .timeline import (DEFAULT_SIGNALS, Duration, EventRecord, format_timestamp,
                       from_epoch, parse_duration, parse_timestamp, to_epoch)

DAY = 86400


class SynthError(ValueError):
    pass


# positive-instance densities at t_g = 6hr used as the default target shape
DEFAULT_DENSITIES = {"Malware": 0.36, "Defacement": 0.15, "DOS": 0.02, "MEU": 0.10}


@dataclass(frozen=True)
class SignalParams:
    base_rate: float  # mentions per day, or mean mentions/articles per event
    noise: float = 0.3  # sd of the daily log-normal intensity jitter


DEFAULT_SIGNAL_PARAMS = {
    "TCM": SignalParams(40.0),
    "TEM": SignalParams(60.0),
    "GEM": SignalParams(6.0),
    "GEA": SignalParams(3.0),
    "GET": SignalParams(1.0),  # tone shift per unit lift, in tone points
}


@dataclass(frozen=True)
class SyntheticSpec:
    start: datetime = datetime(2015, 9, 1)
    gt_start: datetime = datetime(2016, 4, 1)
    gt_end: datetime = datetime(2016, 10, 30)
    slot: Duration = parse_duration("6hr")
    densities: dict = field(default_factory=lambda: dict(DEFAULT_DENSITIES))
    signals: dict = field(default_factory=lambda: dict(DEFAULT_SIGNAL_PARAMS))
    planted: dict = field(default_factory=lambda: {"TCM": 3.0, "GEA": 3.0})
    lead: Duration = parse_duration("1m")
    visibility: float = 1.0  # chance an attack lifts each planted signal
    campaign_days: float = 14.0  # mean sojourn in each regime
    campaign_lift: float = 6.0  # attack propensity, active vs quiet
    gdelt_events_per_day: float = 25.0
    negative_fraction: float = 0.6
    mention_records_per_day: int = 4
    seed: int = 0

    def __post_init__(self):
        for name in ("start", "gt_start", "gt_end"):
            object.__setattr__(self, name, parse_timestamp(getattr(self, name)))
        for name in ("slot", "lead"):
            v = getattr(self, name)
            if isinstance(v, str):
                object.__setattr__(self, name, parse_duration(v))
        if not self.start <= self.gt_start < self.gt_end:
            raise SynthError("need start <= gt_start < gt_end")
        if self.lead.nominal_days <= 0:
            raise SynthError("lead window must be positive")
        for a, d in self.densities.items():
            if not 0.0 <= d <= 1.0:
                raise SynthError(f"density for {a} must lie in [0, 1], got {d}")
        if not 0.0 < self.visibility <= 1.0:
            raise SynthError("visibility must lie in (0, 1]")
        if not 0.0 <= self.negative_fraction <= 1.0:
            raise SynthError("negative_fraction must lie in [0, 1]")
        for s, st in self.planted.items():
            if s not in DEFAULT_SIGNALS:
                raise SynthError(f"unknown planted signal {s!r}")
            if st < 0:
                raise SynthError(f"planted strength for {s} must be >= 0")
        for s, sp in self.signals.items():
            if sp.base_rate < 0 or sp.noise < 0:
                raise SynthError(f"signal {s}: base_rate and noise must be >= 0")
        if self.campaign_days < 1 or self.campaign_lift < 1:
            raise SynthError("campaign_days and campaign_lift must be >= 1")
        if self.gdelt_events_per_day <= 0 or self.mention_records_per_day < 1:
            raise SynthError("event rates must be positive")


def _campaign(n_days: int, spec: SyntheticSpec, rng) -> np.ndarray:
    """Daily attack propensity from a symmetric two-state chain."""
    switch = 1.0 / spec.campaign_days
    state = np.empty(n_days, dtype=bool)
    s = rng.random() < 0.5
    flips = rng.random(n_days) < switch
    for d in range(n_days):
        if flips[d]:
            s = not s
        state[d] = s
    return np.where(state, spec.campaign_lift, 1.0)


def _schedule(slot_starts, slot_len, weights, density, rng) -> np.ndarray:
    """Attack instants: exactly round(density * n) slots, one attack each,
    drawn without replacement with probability proportional to weight."""
    n = len(slot_starts)
    k = int(round(density * n))
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    chosen = np.sort(rng.choice(n, k, replace=False, p=weights / weights.sum()))
    return slot_starts[chosen] + rng.integers(1, slot_len + 1, size=k)


def attack_schedule(spec: SyntheticSpec, rng) -> tuple:
    """(day grid, propensity per day, {attack_type: sorted epoch seconds})."""
    t0 = to_epoch(spec.start)
    t_end = to_epoch(spec.lead.after(spec.gt_end))
    n_days = (t_end - t0) // DAY + 1
    days = t0 + DAY * np.arange(n_days, dtype=np.int64)
    prop = _campaign(n_days, spec, rng)
    slot = spec.slot.seconds
    if spec.slot.months or slot <= 0:
        raise SynthError("slot must be a positive fixed duration")
    g0, g1 = to_epoch(spec.gt_start), to_epoch(spec.gt_end)
    # ground-truth slots are exactly the t_g = slot rows; the rest are padding
    n_gt = (g1 - g0 - slot) // slot + 1
    gt_slots = g0 + slot * np.arange(n_gt, dtype=np.int64)
    pre_slots = np.arange(g0 - slot, t0 - 1, -slot, dtype=np.int64)[::-1]
    post_slots = np.arange(gt_slots[-1] + slot, t_end, slot, dtype=np.int64)
    attacks = {}
    for a in sorted(spec.densities):
        d = spec.densities[a]
        parts = []
        for slots in (pre_slots, gt_slots, post_slots):
            if len(slots):
                w = prop[np.clip((slots - t0) // DAY, 0, n_days - 1)]
                parts.append(_schedule(slots, slot, w.astype(float), d, rng))
        attacks[a] = np.sort(np.concatenate(parts))
    return days, prop, attacks


def upcoming_load(days, attacks: dict, spec: SyntheticSpec, masks: dict = None) -> np.ndarray:
    """u(d): upcoming attacks in (d, d + lead], mean-normalized per type.

    ``masks`` (per type, boolean per attack) restricts the count to the
    attacks a signal sees; the normalizer still uses all of them.
    """
    if not attacks:
        return np.zeros(len(days))
    ends = np.array([to_epoch(spec.lead.after(from_epoch(int(d)))) for d in days])
    total = np.zeros(len(days))
    for a, times in attacks.items():
        c = (np.searchsorted(times, ends, side="right")
             - np.searchsorted(times, days, side="right")).astype(float)
        norm = c.mean()
        if masks is not None:
            seen = times[masks[a]]
            c = (np.searchsorted(seen, ends, side="right")
                 - np.searchsorted(seen, days, side="right")).astype(float)
        total += c / norm if norm > 0 else c
    return total / len(attacks)


def generate_events(spec: SyntheticSpec = SyntheticSpec()) -> list:
    """A sorted event stream: mention records, GDELT-style event records and
    attack records. Same spec and seed give the same list."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x5eed]))
    days, _, attacks = attack_schedule(spec, rng)
    if spec.visibility < 1.0:
        loads = {}
        for sig in sorted(spec.planted):
            masks = {a: rng.random(len(t)) < spec.visibility for a, t in attacks.items()}
            loads[sig] = upcoming_load(days, attacks, spec, masks)
    else:
        shared = upcoming_load(days, attacks, spec)
        loads = {sig: shared for sig in spec.planted}
    gt_end = to_epoch(spec.gt_end)
    days = days[days < gt_end]
    loads = {sig: u[: len(days)] for sig, u in loads.items()}
    zero = np.zeros(len(days))

    def lift(sig):
        return 1.0 + spec.planted.get(sig, 0.0) * loads.get(sig, zero)

    def jitter(sig):
        sd = spec.signals[sig].noise
        return np.exp(rng.normal(-0.5 * sd * sd, sd, len(days)))

    out = []
    per = spec.mention_records_per_day
    for sig, stream in (("TCM", "twitter-cyber"), ("TEM", "twitter-entity")):
        lam = spec.signals[sig].base_rate * lift(sig) * jitter(sig)
        counts = rng.poisson(np.repeat(lam / per, per))
        offs = rng.integers(0, DAY, size=len(counts))
        base = np.repeat(days, per)
        for t, c in zip(base + offs, counts):
            if c > 0:
                out.append((int(t), stream, "mention", float(c), None, None, None, None))

    m_scale = spec.signals["GEM"].base_rate * lift("GEM") * jitter("GEM")
    a_scale = spec.signals["GEA"].base_rate * lift("GEA") * jitter("GEA")
    tone_shift = spec.signals["GET"].base_rate * (lift("GET") - 1.0)
    n_ev = rng.poisson(spec.gdelt_events_per_day, len(days))
    for i, n in enumerate(n_ev):
        if n == 0:
            continue
        offs = rng.integers(0, DAY, size=n)
        neg = rng.random(n) < spec.negative_fraction
        tone = np.where(neg, -rng.gamma(2.0, 1.5, n), rng.gamma(2.0, 1.5, n)) - tone_shift[i]
        tone = np.clip(tone, -100.0, 100.0)
        mentions = 1 + rng.poisson(m_scale[i], n)
        articles = 1 + rng.poisson(a_scale[i], n)
        for j in range(n):
            out.append((int(days[i] + offs[j]), "gdelt-events", "event", 1.0,
                        round(float(tone[j]), 4), int(mentions[j]), int(articles[j]), None))

    t0 = to_epoch(spec.start)
    for a, times in attacks.items():
        for t in times:
            if t0 < t <= gt_end:
                out.append((int(t), "ground-truth", "attack", 1.0, None, None, None, a))
    out.sort(key=lambda r: (r[0], r[1], r[7] or "", r[3], r[4] or 0.0))
    return [EventRecord(from_epoch(t), s, k, v, tone, m, ar, a)
            for t, s, k, v, tone, m, ar, a in out]


def describe(spec: SyntheticSpec) -> dict:
    return {"start": format_timestamp(spec.start), "gt_start": format_timestamp(spec.gt_start),
            "gt_end": format_timestamp(spec.gt_end), "lead": spec.lead.label,
            "planted": ",".join(f"{k}:{v}" for k, v in sorted(spec.planted.items())),
            "seed": spec.seed}


def gaussian_imbalanced(n: int = 400, density: float = 0.08, n_features: int = 5,
                        separation: float = 1.0, n_informative: int = 2, seed: int = 0,
                        signals=None) -> WeightedDataset:
    """Two overlapping Gaussian classes: minority shifted by ``separation``
    standard deviations on the first ``n_informative`` features."""
    rng = np.random.default_rng(seed)
    n_pos = max(2, int(round(density * n)))
    X = rng.normal(size=(n, n_features))
    y = np.zeros(n, dtype=np.int64)
    y[rng.choice(n, n_pos, replace=False)] = 1
    X[y == 1, :n_informative] += separation
    names = tuple(signals or (f"x{i}" for i in range(n_features)))
    return WeightedDataset(X, y, np.ones(n), signals=names)


def overlapping_clusters(n: int = 400, density: float = 0.08, n_features: int = 5,
                         majority_shift: float = 0.75, minority_shift: float = 2.5,
                         overlap_fraction: float = 0.3, minority_sd: float = 0.7,
                         seed: int = 0) -> WeightedDataset:
    """Imbalanced set whose minority cluster sits next to a majority sub-cluster.

    Majority rows are standard normal, with ``overlap_fraction`` of them
    shifted by ``majority_shift`` on the first two features; minority rows
    are a tighter blob shifted by ``minority_shift`` on the same two.
    """
    rng = np.random.default_rng(seed)
    n_pos = max(2, int(round(density * n)))
    n_neg = n - n_pos
    X0 = rng.normal(size=(n_neg, n_features))
    X0[rng.random(n_neg) < overlap_fraction, :2] += majority_shift
    X1 = rng.normal(scale=minority_sd, size=(n_pos, n_features))
    X1[:, :2] += minority_shift
    X = np.vstack([X0, X1])
    y = np.concatenate([np.zeros(n_neg, dtype=np.int64), np.ones(n_pos, dtype=np.int64)])
    perm = rng.permutation(n)
    return WeightedDataset(X[perm], y[perm], np.ones(n),
                           signals=tuple(f"x{i}" for i in range(n_features)))


__all__ = ["SyntheticSpec", "SignalParams", "SynthError", "DEFAULT_DENSITIES",
           "DEFAULT_SIGNAL_PARAMS", "generate_events", "attack_schedule", "upcoming_load",
           "describe", "gaussian_imbalanced", "overlapping_clusters"]
