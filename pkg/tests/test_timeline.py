from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cyberforecast.timeline import (
    ColumnMapping, EventIndex, EventRecord, GranularityPair, InsufficientHistoryError,
    TimelineError, aggregate_signal, build_dataset, count_ground_truth, expected_row_count,
    format_timestamp, generate_datasets, granularity_grid, parse_duration, parse_timestamp,
    read_events, read_mapped_events, row_times, write_events)

UTC = timezone.utc
T0 = datetime(2016, 1, 1, tzinfo=UTC)


def mention(t, stream="twitter-cyber", value=1.0):
    return EventRecord(t, stream, "mention", value)


def gevent(t, tone, mentions=1, articles=1):
    return EventRecord(t, "gdelt-events", "event", 1.0, tone, mentions, articles)


def attack(t, kind="DOS"):
    return EventRecord(t, "ground-truth", "attack", attack_type=kind)


def oracle_signal(events, signal, start, end, per_day=True):
    """Linear scan over (start, end]."""
    days = (end - start).total_seconds() / 86400.0
    inside = [e for e in events if start < e.timestamp <= end]
    if signal in ("TCM", "TEM"):
        stream = "twitter-cyber" if signal == "TCM" else "twitter-entity"
        total = sum(e.value for e in inside if e.stream_id == stream and e.kind == "mention")
        return total / days if per_day else total
    neg = [e for e in inside if e.stream_id == "gdelt-events" and e.kind == "event" and e.tone < 0]
    if signal == "GET":
        return sum(e.tone for e in neg) / len(neg) if neg else 0.0
    total = sum((e.mentions if signal == "GEM" else e.articles) for e in neg)
    return total / days if per_day else total


# ---------------------------------------------------------------- durations

def test_parse_duration_units():
    assert parse_duration("6hr").seconds == 6 * 3600
    assert parse_duration("3d").seconds == 3 * 86400
    assert parse_duration("1w").seconds == 7 * 86400
    assert parse_duration("3m").months == 3
    assert parse_duration("1y").months == 12
    for bad in ("", "0d", "x", "1.5m", "-1d"):
        with pytest.raises(TimelineError):
            parse_duration(bad)


def test_months_are_calendar_aware():
    m = parse_duration("1m")
    assert m.before(datetime(2016, 3, 31, tzinfo=UTC)) == datetime(2016, 2, 29, tzinfo=UTC)
    assert m.before(datetime(2016, 5, 15, 6, tzinfo=UTC)) == datetime(2016, 4, 15, 6, tzinfo=UTC)


def test_granularity_pair_rules():
    with pytest.raises(TimelineError):
        GranularityPair(parse_duration("1m"), parse_duration("1m"))
    p = GranularityPair(parse_duration("1m"), parse_duration("6hr"), {"GEA": "3m"})
    assert p.tx_for("GEA").months == 3 and p.tx_for("TCM").months == 1
    assert p.tx_label == "1m+GEA@3m"
    assert len(granularity_grid()) == 20


def test_timestamps_round_trip():
    t = parse_timestamp("2016-04-01T06:00:00Z")
    assert format_timestamp(t) == "2016-04-01T06:00:00Z"
    assert parse_timestamp("2016-04-01T08:00:00+02:00") == t
    assert parse_timestamp("2016-04-01T06:00:00") == t
    with pytest.raises(TimelineError):
        parse_timestamp("yesterday")


def test_event_record_invariants():
    with pytest.raises(TimelineError):
        gevent(T0, tone=150)
    with pytest.raises(TimelineError):
        EventRecord(T0, "gdelt-events", "event", mentions=-1)
    with pytest.raises(TimelineError):
        EventRecord(T0, "ground-truth", "attack")
    with pytest.raises(TimelineError):
        EventRecord(T0, "x", "tweet")


# ---------------------------------------------------------------- signals

def test_tcm_fourteen_mentions_in_a_week():
    ev = [mention(T0 + timedelta(hours=12 * i + 1)) for i in range(14)]
    end = T0 + timedelta(days=7)
    assert aggregate_signal(ev, "TCM", T0, end) == pytest.approx(2.0)


def test_get_empty_window_is_zero():
    assert aggregate_signal([], "GET", T0, T0 + timedelta(days=1)) == 0.0
    ev = [gevent(T0 + timedelta(hours=1), tone=4.0)]
    assert aggregate_signal(ev, "GET", T0, T0 + timedelta(days=1)) == 0.0


def test_gem_sums_negative_event_mentions():
    ev = [gevent(T0 + timedelta(hours=1), -2.0, mentions=3),
          gevent(T0 + timedelta(hours=2), -1.0, mentions=5),
          gevent(T0 + timedelta(hours=3), 2.0, mentions=100)]
    assert aggregate_signal(ev, "GEM", T0, T0 + timedelta(days=1)) == pytest.approx(8.0)
    assert aggregate_signal(ev, "GET", T0, T0 + timedelta(days=1)) == pytest.approx(-1.5)


def test_window_is_half_open():
    ev = [mention(T0), mention(T0 + timedelta(days=1))]
    # the record at the start is excluded, the one at the end included
    assert aggregate_signal(ev, "TCM", T0, T0 + timedelta(days=1), per_day=False) == 1.0


def test_unknown_signal_and_unsorted_input():
    with pytest.raises(TimelineError):
        aggregate_signal([], "XYZ", T0, T0 + timedelta(days=1))
    ev = [mention(T0 + timedelta(days=2)), mention(T0 + timedelta(days=1))]
    with pytest.raises(TimelineError):
        aggregate_signal(ev, "TCM", T0, T0 + timedelta(days=3))


events_strategy = st.lists(
    st.tuples(st.integers(0, 20 * 86400), st.sampled_from(["m1", "m2", "g"]),
              st.floats(-20, 20, allow_nan=False), st.integers(0, 9), st.integers(0, 9)),
    max_size=60)


def _build(raw):
    out = []
    for sec, kind, tone, m, a in sorted(raw, key=lambda r: r[0]):
        t = T0 + timedelta(seconds=sec)
        if kind == "m1":
            out.append(mention(t, value=float(m)))
        elif kind == "m2":
            out.append(mention(t, "twitter-entity"))
        else:
            out.append(gevent(t, round(tone, 2), m, a))
    return out


@given(events_strategy, st.integers(0, 15 * 86400), st.integers(1, 6 * 86400),
       st.sampled_from(["TCM", "TEM", "GEM", "GEA", "GET"]), st.booleans())
def test_index_matches_linear_scan(raw, start, length, signal, per_day):
    ev = _build(raw)
    s, e = T0 + timedelta(seconds=start), T0 + timedelta(seconds=start + length)
    got = aggregate_signal(ev, signal, s, e, per_day=per_day)
    assert got == pytest.approx(oracle_signal(ev, signal, s, e, per_day), rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------- ground truth

def test_ground_truth_clamps_and_boundaries():
    t = T0
    three = [attack(t + timedelta(hours=h)) for h in (1, 2, 3)]
    assert count_ground_truth(three, "DOS", t, "24hr") == 1
    assert count_ground_truth([], "DOS", t, "24hr") == 0
    assert count_ground_truth([attack(t + timedelta(hours=24))], "DOS", t, "24hr") == 1
    assert count_ground_truth([attack(t)], "DOS", t, "24hr") == 0
    assert count_ground_truth(three, "Malware", t, "24hr") == 0


# ---------------------------------------------------------------- datasets

def _stream(days=60, attack_hours=()):
    ev = [mention(T0 + timedelta(hours=6 * i + 1)) for i in range(days * 4)]
    ev += [attack(T0 + timedelta(hours=h)) for h in attack_hours]
    ev.sort(key=lambda e: e.timestamp)
    return ev


def test_seven_day_span_gives_seven_rows():
    idx = EventIndex(_stream())
    start = T0 + timedelta(days=20)
    ds = build_dataset(idx, "DOS", GranularityPair(parse_duration("3d"), parse_duration("24hr")),
                       start, start + timedelta(days=7), signal_names=["TCM"])
    assert len(ds) == 7
    assert (ds.w == 1).all()
    ds48 = build_dataset(idx, "DOS", GranularityPair(parse_duration("3d"), parse_duration("48hr")),
                         start, start + timedelta(days=7), signal_names=["TCM"])
    assert abs(len(ds48) - len(ds) / 2) <= 1


@given(st.integers(1, 400 * 24), st.sampled_from([1, 2, 3, 5, 6, 12, 24, 48, 72]))
def test_row_count_closed_form(span_hours, tg_hours):
    a = T0
    b = T0 + timedelta(hours=span_hours)
    tg = parse_duration(f"{tg_hours}hr")
    n = len(row_times(a, b, tg))
    want = (span_hours - tg_hours) // tg_hours + 1 if span_hours >= tg_hours else 0
    assert n == want == expected_row_count(a, b, tg)


def test_daily_attacks_density():
    hours = [24 * d + 3 for d in range(60)]
    idx = EventIndex(_stream(attack_hours=hours))
    start, end = T0 + timedelta(days=10), T0 + timedelta(days=40)
    tx = parse_duration("3d")
    d48 = build_dataset(idx, "DOS", GranularityPair(tx, parse_duration("48hr")), start, end)
    d6 = build_dataset(idx, "DOS", GranularityPair(tx, parse_duration("6hr")), start, end)
    assert d48.positive_rate == 1.0
    assert d6.positive_rate < 1.0


@given(st.lists(st.integers(1, 40 * 24 * 60), max_size=40))
def test_density_monotone_in_tg(attack_minutes):
    ev = _stream(days=45)
    ev += [attack(T0 + timedelta(minutes=m)) for m in attack_minutes]
    ev.sort(key=lambda e: e.timestamp)
    idx = EventIndex(ev)
    start, end = T0 + timedelta(days=5), T0 + timedelta(days=37)
    rates = [build_dataset(idx, "DOS", GranularityPair(parse_duration("3d"), parse_duration(tg)),
                           start, end, signal_names=["TCM"]).positive_rate
             for tg in ("6hr", "12hr", "24hr", "48hr")]
    assert all(a <= b + 1e-12 for a, b in zip(rates, rates[1:]))


def test_no_lookahead():
    ev = _stream()
    idx = EventIndex(ev)
    start, end = T0 + timedelta(days=20), T0 + timedelta(days=30)
    pair = GranularityPair(parse_duration("1w"), parse_duration("24hr"))
    base = build_dataset(idx, "DOS", pair, start, end)
    cut = T0 + timedelta(days=25)
    future = [e for e in ev if e.timestamp <= cut] + \
             [mention(e.timestamp, value=99.0) for e in ev if e.timestamp > cut]
    other = build_dataset(EventIndex(future), "DOS", pair, start, end)
    ends = row_times(start, end, pair.t_g)
    past = ends <= int((cut - datetime(1970, 1, 1, tzinfo=UTC)).total_seconds())
    assert past.any()
    np.testing.assert_array_equal(base.X[past], other.X[past])


def test_per_signal_override_touches_only_its_column():
    ev = _stream() + [gevent(T0 + timedelta(hours=5 * i), -1.0 - i % 3, i % 4, 1) for i in range(200)]
    ev.sort(key=lambda e: e.timestamp)
    idx = EventIndex(ev)
    start, end = T0 + timedelta(days=32), T0 + timedelta(days=40)
    a = build_dataset(idx, "DOS", GranularityPair(parse_duration("1w"), parse_duration("24hr")),
                      start, end)
    b = build_dataset(idx, "DOS", GranularityPair(parse_duration("1w"), parse_duration("24hr"),
                                                  {"GEM": "1m"}), start, end)
    j = a.signals.index("GEM")
    others = [i for i in range(len(a.signals)) if i != j]
    np.testing.assert_array_equal(a.X[:, others], b.X[:, others])
    assert not np.array_equal(a.X[:, j], b.X[:, j])
    assert b.provenance["t_x"] == "1w+GEM@1m"


def test_insufficient_history_names_earliest_time():
    idx = EventIndex(_stream())
    with pytest.raises(InsufficientHistoryError) as err:
        build_dataset(idx, "DOS", GranularityPair(parse_duration("1m"), parse_duration("24hr")),
                      T0 + timedelta(days=10), T0 + timedelta(days=50))
    assert err.value.earliest_usable is not None
    assert "earliest usable currentTime" in str(err.value)
    # the first mention is at 01:00 on day 0; a 1-month window needs to start at or after it
    assert err.value.earliest_usable == datetime(2016, 2, 2, tzinfo=UTC)


def test_generate_datasets_parallel_matches_serial():
    ev = _stream(attack_hours=[50, 300, 700])
    grid = granularity_grid(("3d", "1w"), ("12hr", "24hr"))
    a = generate_datasets(ev, ["DOS"], grid, T0 + timedelta(days=10), T0 + timedelta(days=40))
    b = generate_datasets(ev, ["DOS"], grid, T0 + timedelta(days=10), T0 + timedelta(days=40),
                          workers=3)
    assert list(a) == list(b)
    for k in a:
        np.testing.assert_array_equal(a[k].X, b[k].X)
        np.testing.assert_array_equal(a[k].y, b[k].y)


# ---------------------------------------------------------------- files

def test_event_file_round_trip(tmp_path):
    ev = [mention(T0 + timedelta(hours=1), value=3.0), gevent(T0 + timedelta(hours=2), -2.5, 4, 2),
          attack(T0 + timedelta(hours=3))]
    for delim in (",", "\t"):
        p = tmp_path / f"ev{len(delim)}.txt"
        write_events(p, ev, delimiter=delim)
        back = read_events(p)
        assert back == ev


def test_event_file_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("timestamp,stream_id\n2016-01-01T00:00:00Z,x\n")
    with pytest.raises(TimelineError, match="header lacks"):
        read_events(p)
    p.write_text("timestamp,stream_id,kind\n2016-01-01T00:00:00Z,x,attack\n")
    with pytest.raises(TimelineError, match="line 2"):
        read_events(p)


def test_mapped_gdelt_style_export(tmp_path):
    p = tmp_path / "export.tsv"
    p.write_text("20160101\tX\t-3.5\t7\t2\n20160102\tY\t1.0\t1\t1\n")
    m = ColumnMapping(timestamp_col=0, stream_id="gdelt-events", timestamp_format="%Y%m%d",
                      tone_col=2, mentions_col=3, articles_col=4)
    ev = read_mapped_events(p, m)
    assert [e.mentions for e in ev] == [7, 1]
    assert ev[0].tone == -3.5 and ev[0].timestamp == T0
    assert aggregate_signal(ev, "GEA", T0 - timedelta(days=1), T0 + timedelta(days=3),
                            per_day=False) == 2.0
