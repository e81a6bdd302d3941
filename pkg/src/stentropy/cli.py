"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import synth as synth_mod
from .config import KEYS, RunConfig, describe_keys
from .entropy import compute_sequences
from .errors import DataError, NumericalError, StentropyError
from .features import assemble_features, user_rows
from .gam.io import dump_model, load_model
from .ingest import DemographicVariable, load_dataset, parse_traces, write_demographics, write_traces
from .pipeline import evaluate_table, fit_on_users, predict_user

log = logging.getLogger("stentropy")

SUBCOMMANDS = ("synth", "entropy", "features", "train", "predict", "evaluate")
# keys a model file carries so predictions use the training-time features
_FEATURE_SECTIONS = ("grid.", "entropy.")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _parser():
    p = _Parser(prog="stentropy", description="Spatio-temporal entropy and demographic GAMs.")
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    helps = {
        "synth": "write a synthetic benchmark (traces, demographics, config)",
        "entropy": "export per-slice entropy sequences",
        "features": "export covariate tables per target",
        "train": "fit and save one model per target",
        "predict": "predict demographics of users in a trace file",
        "evaluate": "hold-out evaluation with accuracy report",
    }
    for name in SUBCOMMANDS:
        sp = sub.add_parser(
            name, help=helps[name], description=helps[name], epilog=describe_keys(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        sp.add_argument("--config", required=name != "synth", metavar="FILE",
                        help="key = value configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
        sp.add_argument("--seed", type=int, help="shortcut for run.seed")
        sp.add_argument("--target", help="shortcut for run.target")
        sp.add_argument("--out-dir", help="shortcut for io.out_dir")
        sp.add_argument("--traces", help="shortcut for io.traces")
        if name in ("features", "train", "evaluate"):
            sp.add_argument("--demographics", help="shortcut for io.demographics")
        if name == "predict":
            sp.add_argument("--model", help="shortcut for io.model")
        if name == "evaluate":
            sp.add_argument("--repeats", type=int, help="shortcut for pipeline.repeats")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _resolve(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    cfg.override(args.set)
    shortcuts = {
        "seed": "run.seed", "target": "run.target", "out_dir": "io.out_dir",
        "traces": "io.traces", "demographics": "io.demographics", "model": "io.model",
        "repeats": "pipeline.repeats",
    }
    for attr, key in shortcuts.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg.set(key, val)
    return cfg


def _targets(cfg):
    t = cfg["run.target"]
    return list(DemographicVariable) if t == "all" else [DemographicVariable(t)]


def _out_dir(cfg):
    out = Path(cfg["io.out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(cfg, out):
    (out / "config.resolved.cfg").write_text(cfg.to_text(), encoding="utf-8")


def _model_meta(cfg, target):
    meta = {"target": target.value, "config_fingerprint": cfg.fingerprint()}
    for key in KEYS:
        if key.startswith(_FEATURE_SECTIONS):
            meta[f"config.{key}"] = cfg.raw(key)
    return meta


def cmd_synth(cfg):
    out = _out_dir(cfg)
    make = synth_mod.BENCHMARKS[cfg["synth.benchmark"]]
    dataset, grid = make(cfg["run.seed"], cfg["synth.users_per_profile"], cfg["synth.days"],
                         cfg["synth.fixes_per_hour"])
    write_traces(dataset.traces, out / "traces.csv")
    write_demographics(dataset.demographics, out / "demographics.csv")
    bench = cfg.copy().set_bbox(grid).set("grid.cell_size_m", repr(grid.cell_size))
    bench.set("io.traces", str(out / "traces.csv"))
    bench.set("io.demographics", str(out / "demographics.csv"))
    (out / "config.cfg").write_text(bench.to_text(), encoding="utf-8")
    _snapshot(cfg, out)
    print(f"wrote {len(dataset.traces)} users to {out}")


def cmd_entropy(cfg):
    out = _out_dir(cfg)
    traces = parse_traces(cfg["io.traces"])
    grid = cfg.grid(traces)
    seqs = compute_sequences(traces, grid, cfg.entropy())
    with (out / "entropy.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "slice_index", "slice_start_iso", "entropy_pct"])
        for uid, seq in seqs.items():
            for t, v in enumerate(seq.values):
                w.writerow([uid, t, seq.slice_spec.start_iso(t), "" if v is None else repr(v)])
    _snapshot(cfg, out)


def _labeled_tables(cfg):
    dataset = load_dataset(cfg["io.traces"], cfg["io.demographics"])
    grid = cfg.grid(dataset.traces)
    cfg = cfg.copy().set_bbox(grid)
    seqs = None
    tables = {}
    for target in _targets(cfg):
        if seqs is None:
            seqs = compute_sequences(dataset.traces, grid, cfg.entropy())
        tables[target] = assemble_features(dataset, seqs, target)
    return cfg, tables


def cmd_features(cfg):
    out = _out_dir(cfg)
    cfg, tables = _labeled_tables(cfg)
    for target, table in tables.items():
        with (out / f"features_{target.value}.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", "slice_index", "entropy", "max_distance_km", "day_of_week", "label"])
            for r in table.rows:
                w.writerow([r.user_id, r.slice_index, repr(r.entropy), repr(r.max_distance),
                            r.day_of_week, r.label.label])
    _snapshot(cfg, out)


def cmd_train(cfg):
    out = _out_dir(cfg)
    cfg, tables = _labeled_tables(cfg)
    models = {t: fit_on_users(table, table.users(), cfg) for t, table in tables.items()}
    for target, model in models.items():
        dump_model(model, out / f"model_{target.value}.txt", _model_meta(cfg, target))
        print(f"target={target.value} users={len(tables[target].users())} "
              f"rows={len(tables[target])} lambdas={[list(m.lambdas) for m in model.binary_models]}")
    _snapshot(cfg, out)


def cmd_predict(cfg):
    out = _out_dir(cfg)
    traces = parse_traces(cfg["io.traces"])
    for target in _targets(cfg):
        path = cfg["io.model"] or str(out / f"model_{target.value}.txt")
        model, meta = load_model(path, target.parse_level)
        if meta.get("target", target.value) != target.value:
            raise DataError(f"{path} is a {meta['target']} model, not {target.value}",
                            "cli.predict")
        mcfg = cfg.copy()
        for key, val in meta.items():
            if key.startswith("config."):
                mcfg.set(key[len("config."):], val)
        grid = mcfg.grid(traces)
        seqs = compute_sequences(traces, grid, mcfg.entropy())
        fname = out / f"predictions_{target.value}.csv"
        with fname.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", "predicted", "slice_count"]
                       + [f"p_{lvl.label}" for lvl in model.class_levels])
            for uid, seq in seqs.items():
                rows = user_rows(traces[uid], seq)
                if not rows:
                    log.warning("user %s has no observed slices; skipped", uid)
                    continue
                pred = predict_user(model, rows, mcfg["pipeline.aggregate"])
                w.writerow([uid, pred.predicted.label, pred.slice_count]
                           + [repr(p) for p in pred.probabilities])
    _snapshot(cfg, out)


def cmd_evaluate(cfg):
    out = _out_dir(cfg)
    cfg, tables = _labeled_tables(cfg)
    seed = cfg["run.seed"]
    repeats = max(1, cfg["pipeline.repeats"])
    results = []
    for target, table in tables.items():
        for r in range(repeats):
            report, model = evaluate_table(table, cfg, seed + r)
            results.append((target, r, report, model))
    for target, r, report, model in results:
        suffix = "" if repeats == 1 else f"_seed{seed + r}"
        (out / f"report_{target.value}{suffix}.json").write_text(report.to_json(), encoding="utf-8")
        dump_model(model, out / f"model_{target.value}{suffix}.txt", _model_meta(cfg, target))
        print(report.summary_line())
    if repeats > 1:
        for target in tables:
            accs = [rep.accuracy for t, _, rep, _ in results if t is target]
            print(f"target={target.value} mean_accuracy={np.mean(accs):.4g} repeats={repeats}")
    _snapshot(cfg, out)


COMMANDS = {
    "synth": cmd_synth, "entropy": cmd_entropy, "features": cmd_features,
    "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
}


def run(argv=None):
    """Run the CLI and return the process exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _resolve(args)
        COMMANDS[args.command](cfg)
    except NumericalError as exc:
        print(f"numerical error {exc}", file=sys.stderr)
        return 3
    except StentropyError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error [cli.{args.command}] {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
