"""Command-line entry point: ``cyberforecast {synth,generate,filter,sweep,report}``.

Configuration comes from an optional INI file (``--config``); any key can be
overridden through ``CYBERFORECAST_<SECTION>_<KEY>`` environment variables,
and explicit flags override both. Errors print a single line
``error=<code> <message>`` on stderr; exit status is 0 (ok), 1 (input error)
or 2 (internal error).
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
import warnings

from . import evaluation as ev
from .dataset import read_dataset, write_dataset
from .resampling import SmotePPConfig
from .synth import DEFAULT_DENSITIES, SyntheticSpec, describe, generate_events
from .timeline import (GranularityPair, TimelineError, generate_datasets, parse_duration,
                       read_events, write_events)

log = logging.getLogger("cyberforecast")

ENV_PREFIX = "CYBERFORECAST_"
EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2

DEFAULTS = {
    "run": {
        "attack_types": ",".join(DEFAULT_DENSITIES),
        "t_x": "3d,1w,1m,3m,6m",
        "t_g": "6hr,12hr,24hr,48hr",
        "per_signal_tx": "",
        "gt_start": "2016-04-01T00:00:00Z",
        "gt_end": "2016-10-30T00:00:00Z",
        "signals": "",
        "per_day": "true",
        "variable_tx": "true",
    },
    "filters": {"names": "none,smote,spread,smote_pp", "p": "20", "k2": "5", "k": "5",
                "percent": "", "ratio": "1", "kmeans_max_iter": "100"},
    "classifier": {"strategy": "naive", "alpha": "0.5", "max_parents": "2",
                   "discretization": "median"},
    "cv": {"folds": "10", "repetitions": "10", "stratified": "true",
           "method": "corrected_resampled_t", "cfs_repetitions": "1"},
    "synth": {"start": "2015-09-01T00:00:00Z", "strength": "3.0", "planted": "TCM,GEA", "lead": "1m", "campaign_days": "14",
              "campaign_lift": "6", "visibility": "1.0"},
    "general": {"seed": "0", "workers": "1"},
}


class CliError(Exception):
    def __init__(self, code: str, message: str, status: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code
        self.status = status


def load_config(path=None, environ=None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser(interpolation=None)
    cfg.read_dict(DEFAULTS)
    if path:
        if not os.path.exists(path):
            raise CliError("config_missing", f"config file not found: {path}")
        try:
            cfg.read(path)
        except configparser.Error as exc:
            raise CliError("config_invalid", str(exc).replace("\n", " ")) from exc
    environ = os.environ if environ is None else environ
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        rest = key[len(ENV_PREFIX):].lower()
        for section in cfg.sections():
            if rest.startswith(section + "_"):
                cfg.set(section, rest[len(section) + 1:], value)
                break
    return cfg


def _list(value: str) -> list:
    return [v.strip() for v in value.split(",") if v.strip()]


def _bool(cfg, section, key) -> bool:
    try:
        return cfg.getboolean(section, key)
    except ValueError as exc:
        raise CliError("config_invalid", f"[{section}] {key}: {exc}") from exc


def _num(cfg, section, key, kind=float):
    raw = cfg.get(section, key)
    try:
        return kind(raw)
    except ValueError:
        raise CliError("config_invalid", f"[{section}] {key}={raw!r} is not a valid number") from None


def grid_from(cfg) -> list:
    overrides = {}
    for item in _list(cfg.get("run", "per_signal_tx")):
        if "=" not in item:
            raise CliError("config_invalid", f"per_signal_tx entry {item!r} must be SIGNAL=DURATION")
        s, d = item.split("=", 1)
        overrides[s.strip()] = parse_duration(d.strip())
    txs = [parse_duration(t) for t in _list(cfg.get("run", "t_x"))]
    tgs = [parse_duration(t) for t in _list(cfg.get("run", "t_g"))]
    if not txs or not tgs:
        raise CliError("config_invalid", "t_x and t_g lists must be non-empty")
    return [GranularityPair(tx, tg, overrides) for tg in tgs for tx in txs]


def filters_from(cfg) -> list:
    out = []
    for name in _list(cfg.get("filters", "names")):
        if name == "smote":
            pct = cfg.get("filters", "percent").strip()
            params = {"k": _num(cfg, "filters", "k", int)}
            if pct:
                params["percent"] = float(pct)
        elif name == "spread":
            params = {"ratio": _num(cfg, "filters", "ratio")}
        elif name == "smote_pp":
            params = {"p": _num(cfg, "filters", "p"), "k2": _num(cfg, "filters", "k2", int),
                      "kmeans_max_iter": _num(cfg, "filters", "kmeans_max_iter", int)}
            SmotePPConfig(p=params["p"], k2=params["k2"],
                          kmeans_max_iter=params["kmeans_max_iter"])
        else:
            params = {}
        out.append(ev.FilterSpec(name, params))
    if not out:
        raise CliError("config_invalid", "no filters selected")
    return out


def classifier_from(cfg) -> ev.ClassifierConfig:
    c = ev.ClassifierConfig(strategy=cfg.get("classifier", "strategy"),
                            alpha=_num(cfg, "classifier", "alpha"),
                            max_parents=_num(cfg, "classifier", "max_parents", int),
                            discretization=cfg.get("classifier", "discretization"))
    if c.strategy not in ("naive", "k2_hill_climb"):
        raise CliError("config_invalid", f"unknown classifier strategy {c.strategy!r}")
    if c.alpha < 0 or c.max_parents < 1:
        raise CliError("config_invalid", "alpha must be >= 0 and max_parents >= 1")
    if c.discretization not in ("median", "entropy", "mdl"):
        raise CliError("config_invalid", f"unknown discretization {c.discretization!r}")
    return c


def plan_from(cfg, seed) -> ev.CvPlan:
    return ev.CvPlan(folds=_num(cfg, "cv", "folds", int),
                     repetitions=_num(cfg, "cv", "repetitions", int), seed=seed,
                     stratified=_bool(cfg, "cv", "stratified"))


def _require_file(path, what):
    if not path:
        raise CliError("missing_argument", f"{what} path is required")
    if not os.path.isfile(path):
        raise CliError("file_not_found", f"{what} not found: {path}")


# --------------------------------------------------------------------------
# subcommands

def cmd_synth(args, cfg, seed):
    planted = {s: _num(cfg, "synth", "strength") for s in _list(cfg.get("synth", "planted"))}
    spec = SyntheticSpec(start=cfg.get("synth", "start"), gt_start=cfg.get("run", "gt_start"),
                         gt_end=cfg.get("run", "gt_end"), planted=planted,
                         lead=cfg.get("synth", "lead"),
                         campaign_days=_num(cfg, "synth", "campaign_days"),
                         campaign_lift=_num(cfg, "synth", "campaign_lift"),
                         visibility=_num(cfg, "synth", "visibility"), seed=seed)
    events = generate_events(spec)
    out = args.out or "events.csv"
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    write_events(out, events)
    with open(out + ".meta", "w") as fh:
        for k, v in describe(spec).items():
            fh.write(f"{k}={v}\n")
        fh.write(f"records={len(events)}\n")
    print(f"wrote {len(events)} events to {out}")


def cmd_generate(args, cfg, seed):
    _require_file(args.events, "events file")
    events = read_events(args.events)
    attacks = _list(cfg.get("run", "attack_types"))
    signals = _list(cfg.get("run", "signals")) or None
    out = args.out or "datasets"
    os.makedirs(out, exist_ok=True)
    grid = grid_from(cfg)
    if signals:
        from .timeline import DEFAULT_SIGNALS
        sigdefs = {s: DEFAULT_SIGNALS[s] for s in signals if s in DEFAULT_SIGNALS}
        if len(sigdefs) != len(signals):
            raise CliError("config_invalid", f"unknown signal in {signals}")
    else:
        sigdefs = None
    result = generate_datasets(events, attacks, grid, cfg.get("run", "gt_start"),
                               cfg.get("run", "gt_end"), signals=sigdefs,
                               per_day=_bool(cfg, "run", "per_day"), workers=args.workers)
    n = 0
    for (attack, pair), ds in result.items():
        name = f"{attack}_{pair.tx_label}_{pair.t_g.label}".replace("+", "_").replace("@", "-")
        write_dataset(ds, os.path.join(out, name + ".csv"))
        n += 1
    print(f"wrote {n} datasets to {out}")


def cmd_filter(args, cfg, seed):
    _require_file(args.input, "input dataset")
    ds = read_dataset(args.input)
    if ds.discrete:
        raise CliError("invalid_input", "filters need numeric signal values, got Low/High")
    name = args.filter or "smote_pp"
    params = {}
    if name == "smote":
        params = {"k": args.k if args.k is not None else _num(cfg, "filters", "k", int)}
        if args.percent is not None:
            params["percent"] = args.percent
    elif name == "spread":
        params = {"ratio": args.ratio if args.ratio is not None else _num(cfg, "filters", "ratio")}
    elif name == "smote_pp":
        params = {"p": args.p if args.p is not None else _num(cfg, "filters", "p"),
                  "k2": args.k2 if args.k2 is not None else _num(cfg, "filters", "k2", int)}
    filt = ev.FilterSpec(name, params)
    out_ds = filt.apply(ds, seed)
    mlab = 1 if ds.class_count(1) <= ds.class_count(0) else 0
    out_ds = out_ds.with_meta(
        filter=name, seed=seed,
        removed=int(out_ds.meta.get("removed", 0)),
        synthetic=int(out_ds.meta.get("synthetic", 0)),
        minority_total=float(out_ds.w[out_ds.y == mlab].sum()),
        majority_total=float(out_ds.w[out_ds.y != mlab].sum()))
    out = args.out or "filtered.csv"
    write_dataset(out_ds, out)
    print(f"wrote {len(out_ds)} rows to {out}")


def cmd_sweep(args, cfg, seed):
    _require_file(args.events, "events file")
    events = read_events(args.events)
    plan = plan_from(cfg, seed)
    attacks = _list(cfg.get("run", "attack_types"))
    out = args.out or "report"

    def progress(done, total):
        log.info("sweep %d/%d datasets", done, total)

    report = ev.sweep(events, attacks, grid_from(cfg), filters_from(cfg), plan,
                      gt_start=cfg.get("run", "gt_start"), gt_end=cfg.get("run", "gt_end"),
                      clf=classifier_from(cfg),
                      signals=_list(cfg.get("run", "signals")) or None,
                      per_day=_bool(cfg, "run", "per_day"), workers=args.workers,
                      comparison_method=cfg.get("cv", "method"),
                      variable_tx=_bool(cfg, "run", "variable_tx"),
                      cfs_repetitions=_num(cfg, "cv", "cfs_repetitions", int),
                      progress=progress)
    files = ev.write_report(report, out)
    print(f"wrote {len(report.cells)} cells, {len(files)} files to {out}")


def summarize(report_dir) -> str:
    """Per attack type: best cell, filter ranking with significance markers
    (* = significantly better than the compared filter, ! = worse) and the
    top signals by discriminativeness."""
    cells_path = os.path.join(report_dir, "cells.csv")
    _require_file(cells_path, "cells file")
    cells = ev.read_csv_rows(cells_path)
    if not cells:
        raise CliError("empty_report", f"{cells_path} has no cells")
    comps_path = os.path.join(report_dir, "comparisons.csv")
    comps = ev.read_csv_rows(comps_path) if os.path.exists(comps_path) else []
    imp_path = os.path.join(report_dir, "importance.csv")
    imp = ev.read_csv_rows(imp_path) if os.path.exists(imp_path) else []
    lines = []
    for attack in dict.fromkeys(c["attack_type"] for c in cells):
        cs = [c for c in cells if c["attack_type"] == attack and c["mean_auc"] != "nan"]
        if not cs:
            lines.append(f"{attack}: no valid cells")
            continue
        best = max(cs, key=lambda c: float(c["mean_auc"]))
        lines.append(f"{attack}: best t_x={best['t_x']} t_g={best['t_g']} "
                     f"filter={best['filter']} AUC={float(best['mean_auc']):.3f}")
        ranking = {}
        for c in cs:
            f = c["filter"]
            if f not in ranking or float(c["mean_auc"]) > float(ranking[f]["mean_auc"]):
                ranking[f] = c
        for f, c in sorted(ranking.items(), key=lambda kv: -float(kv[1]["mean_auc"])):
            marks = ""
            for r in comps:
                if (r["attack_type"], r["t_x"], r["t_g"], r["filter_a"]) == \
                        (attack, c["t_x"], c["t_g"], f) and r["significant"] == "1":
                    better = float(r["mean_a"]) > float(r["mean_b"])
                    marks += f" {'*' if better else '!'}vs:{r['filter_b']}"
            lines.append(f"  {ev.FILTER_SHORT.get(f, f):>4} {float(c['mean_auc']):.3f} "
                         f"(t_x={c['t_x']} t_g={c['t_g']}){marks}")
        top = [r for r in imp if r["attack_type"] == attack]
        if top:
            top.sort(key=lambda r: int(r["rank"]))
            lines.append("  signals: " + ", ".join(
                f"{r['signal']}={float(r['score']):.3f}{'' if r['dependent'] == '1' else '(indep)'}"
                for r in top))
    return "\n".join(lines)


def cmd_report(args, cfg, seed):
    src = args.input or args.out or "report"
    text = summarize(src)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "summary.txt"), "w") as fh:
            fh.write(text + "\n")


COMMANDS = {"synth": cmd_synth, "generate": cmd_generate, "filter": cmd_filter,
            "sweep": cmd_sweep, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides [general] seed)")
    common.add_argument("--workers", type=int, help="worker processes for independent jobs")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="cyberforecast", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic event stream")
    g = sub.add_parser("generate", parents=[common], help="materialize datasets from events")
    g.add_argument("--events", required=True)
    f = sub.add_parser("filter", parents=[common], help="apply one rebalancing filter")
    f.add_argument("--input", required=True)
    f.add_argument("--filter", choices=ev.FILTER_NAMES, default="smote_pp")
    f.add_argument("--p", type=float)
    f.add_argument("--k2", type=int)
    f.add_argument("--k", type=int)
    f.add_argument("--percent", type=float)
    f.add_argument("--ratio", type=float)
    s = sub.add_parser("sweep", parents=[common], help="run the full evaluation grid")
    s.add_argument("--events", required=True)
    r = sub.add_parser("report", parents=[common], help="summarize a sweep directory")
    r.add_argument("--input", help="sweep output directory")
    return p


def _fail(code, message, status):
    msg = " ".join(str(message).split())
    print(f"error={code} {msg}", file=sys.stderr)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else _num(cfg, "general", "seed", int)
        workers = args.workers if args.workers is not None else _num(cfg, "general", "workers", int)
        if workers < 1:
            raise CliError("config_invalid", "workers must be >= 1")
        args.workers = min(workers, os.cpu_count() or 1)
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", RuntimeWarning)
            COMMANDS[args.command](args, cfg, seed)
        return EXIT_OK
    except CliError as exc:
        return _fail(exc.code, exc, exc.status)
    except FileNotFoundError as exc:
        return _fail("file_not_found", exc, EXIT_INPUT)
    except (TimelineError, ValueError) as exc:
        return _fail(type(exc).__name__.lower(), exc, EXIT_INPUT)
    except Exception as exc:  # noqa: BLE001 - last-resort guard for the exit-code contract
        log.debug("internal error", exc_info=True)
        return _fail("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
