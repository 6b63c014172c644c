"""Event ingestion and per-(attack type, t_x, t_g) dataset generation.

Signal windows are half-open ``(t - t_x, t]`` and ground-truth windows are
``(t, t + t_g]``. Month durations are calendar-aware: ``1m`` before
2016-03-31 is 2016-02-29.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np
from dateutil.relativedelta import relativedelta

from .dataset import WeightedDataset

KINDS = ("mention", "event", "attack")
EVENT_FIELDS = ("timestamp", "stream_id", "kind", "value", "tone", "mentions",
                "articles", "attack_type")
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class TimelineError(ValueError):
    """Bad events, configuration or granularity."""


class InsufficientHistoryError(TimelineError):
    def __init__(self, message, earliest_usable):
        super().__init__(message)
        self.earliest_usable = earliest_usable


# --------------------------------------------------------------------------
# durations

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(s|min|h|hr|hrs|d|w|m|mo|y)\s*$")
_UNIT_SECONDS = {"s": 1, "min": 60, "h": 3600, "hr": 3600, "hrs": 3600,
                 "d": 86400, "w": 7 * 86400}


@dataclass(frozen=True, order=True)
class Duration:
    """A calendar-aware span: whole months plus a fixed number of seconds."""

    months: int = 0
    seconds: int = 0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.months < 0 or self.seconds < 0 or (self.months == 0 and self.seconds == 0):
            raise TimelineError(f"duration must be positive: {self.label or (self.months, self.seconds)}")
        if not self.label:
            object.__setattr__(self, "label", _format_duration(self.months, self.seconds))

    def before(self, t: datetime) -> datetime:
        return t - relativedelta(months=self.months) - timedelta(seconds=self.seconds)

    def after(self, t: datetime) -> datetime:
        return t + relativedelta(months=self.months) + timedelta(seconds=self.seconds)

    @property
    def nominal_days(self) -> float:
        """Rough length, for ordering and display only."""
        return self.months * 30.4375 + self.seconds / 86400.0

    def __str__(self):
        return self.label


def _format_duration(months, seconds):
    if months and not seconds:
        return f"{months}m"
    if not months:
        for unit, size in (("w", 7 * 86400), ("d", 86400), ("h", 3600), ("min", 60)):
            if seconds % size == 0:
                return f"{seconds // size}{unit}"
        return f"{seconds}s"
    return f"{months}m+{seconds}s"


def parse_duration(text) -> Duration:
    if isinstance(text, Duration):
        return text
    m = _DURATION_RE.match(str(text).lower())
    if not m:
        raise TimelineError(f"cannot parse duration {text!r}")
    qty, unit = float(m.group(1)), m.group(2)
    if unit in ("m", "mo", "y"):
        months = qty * (12 if unit == "y" else 1)
        if months != int(months):
            raise TimelineError(f"fractional months are not supported: {text!r}")
        return Duration(months=int(months), label=str(text).strip())
    secs = qty * _UNIT_SECONDS[unit]
    if secs != int(secs):
        raise TimelineError(f"duration must be a whole number of seconds: {text!r}")
    return Duration(seconds=int(secs), label=str(text).strip())


DEFAULT_TX = tuple(parse_duration(s) for s in ("3d", "1w", "1m", "3m", "6m"))
DEFAULT_TG = tuple(parse_duration(s) for s in ("6hr", "12hr", "24hr", "48hr"))


@dataclass(frozen=True)
class GranularityPair:
    t_x: Duration
    t_g: Duration
    per_signal_tx: tuple = ()  # ((signal, Duration), ...), sorted by signal

    def __post_init__(self):
        if self.t_g.months:
            raise TimelineError("t_g must be a fixed length (hours/days), not months")
        items = self.per_signal_tx
        if isinstance(items, Mapping):
            items = items.items()
        items = tuple(sorted((str(k), parse_duration(v)) for k, v in items))
        object.__setattr__(self, "per_signal_tx", items)

    def tx_for(self, signal: str) -> Duration:
        return dict(self.per_signal_tx).get(signal, self.t_x)

    @property
    def max_tx(self) -> Duration:
        return max([self.t_x, *(d for _, d in self.per_signal_tx)],
                   key=lambda d: d.nominal_days)

    @property
    def tx_label(self) -> str:
        if not self.per_signal_tx:
            return self.t_x.label
        extra = "+".join(f"{s}@{d.label}" for s, d in self.per_signal_tx)
        return f"{self.t_x.label}+{extra}"


def granularity_grid(t_x=DEFAULT_TX, t_g=DEFAULT_TG):
    return [GranularityPair(parse_duration(x), parse_duration(g)) for x in t_x for g in t_g]


# --------------------------------------------------------------------------
# events

def parse_timestamp(text) -> datetime:
    if isinstance(text, datetime):
        dt = text
    else:
        s = str(text).strip()
        if s.endswith(("Z", "z")):
            s = s[:-1] + "+00:00"
        try:
            dt = datetime.fromisoformat(s)
        except ValueError as exc:
            raise TimelineError(f"bad timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def to_epoch(dt: datetime) -> int:
    return int((dt - EPOCH).total_seconds())


def from_epoch(sec: int) -> datetime:
    return EPOCH + timedelta(seconds=int(sec))


@dataclass(frozen=True)
class EventRecord:
    timestamp: datetime
    stream_id: str
    kind: str
    value: float = 1.0
    tone: float | None = None
    mentions: int | None = None
    articles: int | None = None
    attack_type: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "timestamp", parse_timestamp(self.timestamp))
        if self.kind not in KINDS:
            raise TimelineError(f"unknown event kind {self.kind!r}")
        if self.tone is not None and not -100.0 <= self.tone <= 100.0:
            raise TimelineError(f"tone {self.tone} outside [-100, 100]")
        for name in ("mentions", "articles"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise TimelineError(f"{name} must be >= 0, got {v}")
        if self.kind == "attack" and not self.attack_type:
            raise TimelineError("attack records need an attack_type")

    @property
    def tone_value(self) -> float:
        return self.value if self.tone is None else self.tone


@dataclass(frozen=True)
class SignalDef:
    """How one signal is computed from a stream.

    ``aggregate`` is one of ``count`` (sum of record values, i.e. mentions),
    ``neg_mentions``, ``neg_articles`` or ``neg_tone``.
    """

    name: str
    stream_id: str
    kind: str
    aggregate: str


DEFAULT_SIGNALS = {
    "TCM": SignalDef("TCM", "twitter-cyber", "mention", "count"),
    "TEM": SignalDef("TEM", "twitter-entity", "mention", "count"),
    "GEM": SignalDef("GEM", "gdelt-events", "event", "neg_mentions"),
    "GEA": SignalDef("GEA", "gdelt-events", "event", "neg_articles"),
    "GET": SignalDef("GET", "gdelt-events", "event", "neg_tone"),
}
AGGREGATES = ("count", "neg_mentions", "neg_articles", "neg_tone")


def _check_sorted(events: Sequence[EventRecord]):
    for i in range(1, len(events)):
        if events[i].timestamp < events[i - 1].timestamp:
            raise TimelineError(f"events are not sorted by timestamp (record {i})")


class _Prefix:
    """Prefix sums over one stream so any window costs two binary searches."""

    def __init__(self, times, amount, count):
        self.times = times
        self.amount = np.concatenate(([0.0], np.cumsum(amount)))
        self.count = np.concatenate(([0], np.cumsum(count)))

    def window(self, starts, ends):
        lo = np.searchsorted(self.times, starts, side="right")
        hi = np.searchsorted(self.times, ends, side="right")
        return self.amount[hi] - self.amount[lo], self.count[hi] - self.count[lo]


class EventIndex:
    """Sorted, column-oriented view of an event sequence.

    Built once and shared read-only by every dataset cell.
    """

    def __init__(self, events: Sequence[EventRecord], signals: Mapping[str, SignalDef] = None):
        _check_sorted(events)
        self.signals = dict(DEFAULT_SIGNALS if signals is None else signals)
        for sd in self.signals.values():
            if sd.aggregate not in AGGREGATES:
                raise TimelineError(f"unknown aggregate {sd.aggregate!r} for {sd.name}")
        self._signal_prefix = {}
        signal_times = []
        for name, sd in self.signals.items():
            recs = [e for e in events if e.stream_id == sd.stream_id and e.kind == sd.kind]
            times = np.array([to_epoch(e.timestamp) for e in recs], dtype=np.int64)
            signal_times.append(times)
            if sd.aggregate == "count":
                amount = np.array([e.value for e in recs], dtype=np.float64)
                count = np.ones(len(recs), dtype=np.int64)
            else:
                neg = np.array([e.tone_value < 0 for e in recs], dtype=bool)
                if sd.aggregate == "neg_mentions":
                    vals = [e.mentions or 0 for e in recs]
                elif sd.aggregate == "neg_articles":
                    vals = [e.articles or 0 for e in recs]
                else:
                    vals = [e.tone_value for e in recs]
                amount = np.where(neg, np.array(vals, dtype=np.float64), 0.0)
                count = neg.astype(np.int64)
            self._signal_prefix[name] = _Prefix(times, amount, count)
        nonempty = [t[0] for t in signal_times if len(t)]
        self.data_start = from_epoch(min(nonempty)) if nonempty else None
        self._attacks = {}
        for e in events:
            if e.kind == "attack":
                self._attacks.setdefault(e.attack_type, []).append(to_epoch(e.timestamp))
        self._attacks = {k: np.array(v, dtype=np.int64) for k, v in self._attacks.items()}

    @property
    def attack_types(self):
        return sorted(self._attacks)

    def signal_values(self, name, starts, ends, per_day=True):
        """Aggregate one signal over windows ``(starts[i], ends[i]]`` (epoch s)."""
        if name not in self.signals:
            raise TimelineError(f"unknown signal {name!r}")
        starts = np.asarray(starts, dtype=np.int64)
        ends = np.asarray(ends, dtype=np.int64)
        amount, count = self._signal_prefix[name].window(starts, ends)
        if self.signals[name].aggregate == "neg_tone":
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(count > 0, amount / np.maximum(count, 1), 0.0)
        if per_day:
            return amount / ((ends - starts) / 86400.0)
        return amount.astype(np.float64)

    def attack_counts(self, attack_type, starts, ends):
        times = self._attacks.get(attack_type, np.zeros(0, dtype=np.int64))
        lo = np.searchsorted(times, np.asarray(starts, dtype=np.int64), side="right")
        hi = np.searchsorted(times, np.asarray(ends, dtype=np.int64), side="right")
        return hi - lo


def aggregate_signal(events: Sequence[EventRecord], signal: str, window_start: datetime,
                     window_end: datetime, *, signals: Mapping[str, SignalDef] = None,
                     per_day: bool = True) -> float:
    """Value of one signal over ``(window_start, window_end]``."""
    window_start, window_end = parse_timestamp(window_start), parse_timestamp(window_end)
    if not window_start < window_end:
        raise TimelineError("window_start must precede window_end")
    defs = DEFAULT_SIGNALS if signals is None else signals
    if signal not in defs:
        raise TimelineError(f"unknown signal {signal!r}")
    idx = EventIndex(events, {signal: defs[signal]})
    return float(idx.signal_values(signal, [to_epoch(window_start)], [to_epoch(window_end)],
                                   per_day=per_day)[0])


def count_ground_truth(events: Sequence[EventRecord], attack_type: str, t: datetime,
                       t_g) -> int:
    """1 if at least one ``attack_type`` attack falls in ``(t, t + t_g]``."""
    t_g = parse_duration(t_g)
    t = parse_timestamp(t)
    end = t_g.after(t)
    n = sum(1 for e in events
            if e.kind == "attack" and e.attack_type == attack_type and t < e.timestamp <= end)
    return min(n, 1)


def row_times(gt_start: datetime, gt_end: datetime, t_g: Duration) -> np.ndarray:
    """Prediction instants gt_start, gt_start + t_g, ... while <= gt_end - t_g."""
    if t_g.months:
        raise TimelineError("t_g must be a fixed length")
    a, b, step = to_epoch(gt_start), to_epoch(gt_end), t_g.seconds
    if b - a < step:
        return np.zeros(0, dtype=np.int64)
    n = (b - a - step) // step + 1
    return a + step * np.arange(n, dtype=np.int64)


def _window_starts(ends: np.ndarray, t_x: Duration) -> np.ndarray:
    if not t_x.months:
        return ends - t_x.seconds
    return np.array([to_epoch(t_x.before(from_epoch(e))) for e in ends], dtype=np.int64)


def build_dataset(index: EventIndex, attack_type: str, pair: GranularityPair,
                  gt_start, gt_end, *, signal_names: Sequence[str] = None,
                  per_day: bool = True, data_start=None) -> WeightedDataset:
    """One dataset: a row per prediction instant, weights all 1."""
    gt_start, gt_end = parse_timestamp(gt_start), parse_timestamp(gt_end)
    if not gt_start < gt_end:
        raise TimelineError("gt_start must precede gt_end")
    names = list(signal_names or index.signals)
    for s in names:
        if s not in index.signals:
            raise TimelineError(f"unknown signal {s!r}")
    for s, _ in pair.per_signal_tx:
        if s not in names:
            raise TimelineError(f"per-signal t_x override for unknown signal {s!r}")
    data_start = parse_timestamp(data_start) if data_start is not None else index.data_start
    if data_start is None:
        raise TimelineError("no signal events to aggregate")
    ends = row_times(gt_start, gt_end, pair.t_g)
    if not len(ends):
        raise TimelineError("ground-truth span shorter than t_g: no rows")
    need = to_epoch(data_start)
    for s in names:
        starts0 = _window_starts(ends[:1], pair.tx_for(s))
        if starts0[0] < need:
            starts = _window_starts(ends, pair.tx_for(s))
            ok = np.flatnonzero(starts >= need)
            first = from_epoch(ends[ok[0]]) if len(ok) else None
            msg = (f"signal {s} with t_x={pair.tx_for(s).label} needs history from "
                   f"{format_timestamp(from_epoch(starts0[0]))} but data starts at "
                   f"{format_timestamp(data_start)}; earliest usable currentTime is "
                   f"{format_timestamp(first) if first else 'none within the span'}")
            raise InsufficientHistoryError(msg, first)

    X = np.empty((len(ends), len(names)), dtype=np.float64)
    for j, s in enumerate(names):
        X[:, j] = index.signal_values(s, _window_starts(ends, pair.tx_for(s)), ends, per_day)
    gt = index.attack_counts(attack_type, ends, ends + pair.t_g.seconds)
    y = np.minimum(gt, 1).astype(np.int64)
    provenance = {"attack_type": attack_type, "t_x": pair.tx_label, "t_g": pair.t_g.label,
                  "gt_start": format_timestamp(gt_start), "gt_end": format_timestamp(gt_end)}
    return WeightedDataset(X, y, np.ones(len(y)), signals=names, class_name="class",
                           provenance=provenance)


def generate_datasets(events, attack_types: Iterable[str], grid: Iterable[GranularityPair],
                      gt_start, gt_end, *, signals: Mapping[str, SignalDef] = None,
                      per_day: bool = True, data_start=None, workers: int = 1):
    """Map ``(attack_type, pair) -> WeightedDataset`` for the whole grid.

    ``events`` may be a sequence of :class:`EventRecord` or a prebuilt
    :class:`EventIndex`. Output does not depend on ``workers``.
    """
    index = events if isinstance(events, EventIndex) else EventIndex(events, signals)
    jobs = [(a, p) for a in attack_types for p in grid]

    def one(job):
        a, p = job
        return build_dataset(index, a, p, gt_start, gt_end, per_day=per_day,
                             data_start=data_start)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    return dict(zip(jobs, results))


def expected_row_count(gt_start, gt_end, t_g) -> int:
    """Closed form of the generation loop's row count."""
    span = (parse_timestamp(gt_end) - parse_timestamp(gt_start)).total_seconds()
    step = parse_duration(t_g).seconds
    if span < step:
        return 0
    return math.floor((span - step) / step) + 1


# --------------------------------------------------------------------------
# event files

def _opt_float(s):
    s = s.strip()
    return float(s) if s else None


def _opt_int(s):
    s = s.strip()
    return int(float(s)) if s else None


def _record_from_fields(row: Mapping[str, str], lineno: int) -> EventRecord:
    try:
        value = _opt_float(row.get("value", "") or "")
        return EventRecord(
            timestamp=row["timestamp"],
            stream_id=row["stream_id"].strip(),
            kind=row["kind"].strip(),
            value=1.0 if value is None else value,
            tone=_opt_float(row.get("tone", "") or ""),
            mentions=_opt_int(row.get("mentions", "") or ""),
            articles=_opt_int(row.get("articles", "") or ""),
            attack_type=(row.get("attack_type", "") or "").strip() or None,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise TimelineError(f"line {lineno}: {exc}") from exc


def read_events(path, *, sort: bool = True) -> list[EventRecord]:
    """Read a line-delimited event file.

    An optional first line ``#delimiter=tab`` (or ``comma``) selects the
    separator; the next line is the column header.
    """
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    delim, start = ",", 0
    if lines and lines[0].startswith("#"):
        directive = lines[0][1:].strip().lower().replace(" ", "")
        if directive in ("delimiter=tab", "format=tsv"):
            delim = "\t"
        elif directive not in ("delimiter=comma", "format=csv"):
            raise TimelineError(f"line 1: unknown header directive {lines[0]!r}")
        start = 1
    reader = csv.reader(lines[start:], delimiter=delim)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        return []
    missing = {"timestamp", "stream_id", "kind"} - set(header)
    if missing:
        raise TimelineError(f"line {start + 1}: header lacks {sorted(missing)}")
    out = []
    for i, fields in enumerate(reader, start=start + 2):
        if not fields or not any(f.strip() for f in fields):
            continue
        if len(fields) != len(header):
            raise TimelineError(f"line {i}: expected {len(header)} fields, got {len(fields)}")
        out.append(_record_from_fields(dict(zip(header, fields)), i))
    if sort:
        out.sort(key=lambda e: e.timestamp)
    return out


def write_events(path, events: Iterable[EventRecord], delimiter: str = ","):
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, datetime):
            return format_timestamp(v)
        return repr(v) if isinstance(v, float) else str(v)

    with open(path, "w", newline="") as fh:
        if delimiter == "\t":
            fh.write("#delimiter=tab\n")
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(EVENT_FIELDS)
        for e in events:
            w.writerow([fmt(getattr(e, f)) for f in EVENT_FIELDS])


@dataclass
class ColumnMapping:
    """Adapter for third-party exports (e.g. global-event TSV dumps).

    Column indices are 0-based and always user supplied. ``stream_id`` and
    ``kind`` are constants for the whole file.
    """

    timestamp_col: int
    stream_id: str
    kind: str = "event"
    timestamp_format: str | None = None  # strptime pattern; None -> RFC 3339
    delimiter: str = "\t"
    has_header: bool = False
    value_col: int | None = None
    tone_col: int | None = None
    mentions_col: int | None = None
    articles_col: int | None = None
    attack_type_col: int | None = None


def read_mapped_events(path, mapping: ColumnMapping, *, sort: bool = True) -> list[EventRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=mapping.delimiter)
        for i, fields in enumerate(reader, start=1):
            if i == 1 and mapping.has_header:
                continue
            if not fields:
                continue
            try:
                def col(c):
                    return fields[c] if c is not None else ""

                raw_ts = fields[mapping.timestamp_col].strip()
                ts = (datetime.strptime(raw_ts, mapping.timestamp_format).replace(tzinfo=timezone.utc)
                      if mapping.timestamp_format else raw_ts)
                row = {"timestamp": ts, "stream_id": mapping.stream_id, "kind": mapping.kind,
                       "value": col(mapping.value_col), "tone": col(mapping.tone_col),
                       "mentions": col(mapping.mentions_col),
                       "articles": col(mapping.articles_col),
                       "attack_type": col(mapping.attack_type_col)}
            except (IndexError, ValueError) as exc:
                raise TimelineError(f"line {i}: {exc}") from exc
            out.append(_record_from_fields(row, i))
    if sort:
        out.sort(key=lambda e: e.timestamp)
    return out
