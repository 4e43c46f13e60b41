"""Single command-line entry point wiring generation, filtering, detection,
preprocessing, training, evaluation, comparison, and the end-to-end per-dpi
pipeline.

Every run resolves one structured config (JSON file + flag overrides, flags
win), writes its outputs plus a manifest into a run directory, and exits 0
on success, 1 on usage errors, 2 on config validation errors, and 3 on
runtime failures (naming the failing stage).

Re-running a subcommand with ``--config <run>/manifest.json`` replays the
recorded configuration; with ``--deterministic`` set, replayed runs
reproduce every output file byte-identically (timing columns are zeroed in
that mode, since wall-clock is inherently unrepeatable).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import platform
import sys
import time
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import get_args, get_origin, get_type_hints

import numpy as np
import pandas as pd

from . import __version__
from .baselines import BASELINE_METHODS, BaselinesConfig
from .dataset import (
    VALID_DPI,
    ClassLabel,
    FeatureTable,
    load_feature_table,
    materialize_fold,
    save_feature_table,
    stratified_kfold,
)
from .evaluate import (
    CvReport,
    PipelineSpec,
    compare_methods,
    cross_validate,
    metrics_from_cm,
    pr_curve,
)
from .gbt import GbtConfig, fit_gbt, save_gbt
from .nn import CnnConfig, build_cnn, extract_embeddings, save_cnn, train_cnn
from .preprocess import PreprocessConfig, apply_pipeline, fit_pipeline, save_preprocessor
from .signals import (
    design_highpass_butterworth,
    detect_spikes_recording,
    filter_recording,
    load_recording,
    magnitude_response,
    save_recording,
    save_spike_train,
)
from .synth import SynthRecordingConfig, SynthTableConfig, synth_feature_table, synth_recording

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems instead of argparse's 2
        raise _UsageError(message)


@dataclass(frozen=True)
class EvalConfig:
    k: int = 10
    seed: int = 0
    averaging: str = "weighted"
    tap: str = "output"
    methods: tuple[str, ...] = BASELINE_METHODS
    n_thresholds: int = 200


@dataclass(frozen=True)
class IoConfig:
    out_dir: str | None = None


@dataclass(frozen=True)
class RunConfig:
    synth: SynthTableConfig = field(default_factory=SynthTableConfig)
    synth_recording: SynthRecordingConfig = field(default_factory=SynthRecordingConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    nn: CnnConfig = field(default_factory=CnnConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)
    baselines: BaselinesConfig = field(default_factory=BaselinesConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    io: IoConfig = field(default_factory=IoConfig)
    determinism: bool = False


def _coerce(value, annotation, path):
    origin = get_origin(annotation)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        return tuple(value)
    if annotation in (float, int, bool, str) and value is not None:
        if annotation is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        if not isinstance(value, annotation):
            raise ConfigError(f"{path}: expected {annotation.__name__}, got {type(value).__name__}")
    return value


def _dataclass_from_dict(cls, doc: dict, path: str):
    """Build a (nested) config dataclass, rejecting unknown keys."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object")
    hints = get_type_hints(cls)
    allowed = {f.name for f in fields(cls)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in doc:
            continue
        value = doc[f.name]
        sub_path = f"{path}.{f.name}" if path else f.name
        default = getattr(cls, f.name, None)
        if is_dataclass(hints.get(f.name)):
            kwargs[f.name] = _dataclass_from_dict(hints[f.name], value, sub_path)
        else:
            kwargs[f.name] = _coerce(value, hints.get(f.name), sub_path)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or cls.__name__}: {exc}") from exc


def _config_to_dict(cfg) -> dict:
    doc = dataclasses.asdict(cfg)

    def scrub(node):
        if isinstance(node, dict):
            return {k: scrub(v) for k, v in node.items()}
        if isinstance(node, tuple):
            return [scrub(v) for v in node]
        if isinstance(node, list):
            return [scrub(v) for v in node]
        return node

    return scrub(doc)


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    doc: dict = {}
    if path:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if isinstance(doc, dict) and "config" in doc and "command" in doc:
            doc = doc["config"]  # a manifest: replay its recorded config
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {part} is not a section")
        node[parts[-1]] = value
    cfg = _dataclass_from_dict(RunConfig, doc, "")
    return cfg


def config_hash(command: str, cfg: RunConfig) -> str:
    doc = _config_to_dict(cfg)
    doc["io"] = {"out_dir": None}  # run location is not part of the experiment identity
    payload = json.dumps({"command": command, "config": doc}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _make_run_dir(cfg: RunConfig, command: str, out_dir: str | None) -> Path:
    if out_dir:
        path = Path(out_dir)
    elif cfg.io.out_dir:
        path = Path(cfg.io.out_dir)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = Path("runs") / f"{stamp}-{config_hash(command, cfg)[:8]}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(run_dir: Path, command: str, cfg: RunConfig) -> None:
    doc = _config_to_dict(cfg)
    doc["io"] = {"out_dir": None}
    manifest = {
        "format_version": 1,
        "package_version": __version__,
        "command": command,
        "config": doc,
        "config_hash": config_hash(command, cfg),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pandas": pd.__version__,
        },
    }
    with open(run_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _seconds(value: float, cfg: RunConfig) -> float:
    # wall-clock is unrepeatable; zero it when byte-identical replays matter
    return 0.0 if cfg.determinism else value


def _cv_report_doc(report: CvReport, cfg: RunConfig) -> dict:
    mean = dict(report.mean)
    mean["train_seconds"] = _seconds(mean["train_seconds"], cfg)
    return {
        "k": report.k,
        "seed": report.seed,
        "model": report.model,
        "mean": mean,
        "folds": [
            {
                "fold": i,
                **{k: v for k, v in m.summary().items()},
                "train_seconds": _seconds(m.train_seconds, cfg),
                "confusion_matrix": cm.tolist(),
            }
            for i, (m, cm) in enumerate(zip(report.fold_metrics, report.fold_cms))
        ],
        "pooled_confusion_matrix": report.pooled_cm.tolist(),
    }


def _write_cv_outputs(run_dir: Path, tag: str, report: CvReport, cfg: RunConfig, plots: bool) -> None:
    with open(run_dir / f"cv_report{tag}.json", "w") as fh:
        json.dump(_cv_report_doc(report, cfg), fh, sort_keys=True, indent=2)
        fh.write("\n")
    rows = [
        [i, m.summary()["accuracy"], m.summary()["precision"], m.summary()["recall"],
         m.summary()["f1"], _seconds(m.train_seconds, cfg)]
        for i, m in enumerate(report.fold_metrics)
    ]
    _write_csv(
        run_dir / f"fold_metrics{tag}.csv",
        ["fold", "accuracy", "precision", "recall", "f1", "train_seconds"],
        rows,
    )
    _write_csv(
        run_dir / f"confusion{tag}.csv",
        ["true\\pred"] + [ClassLabel(c).token for c in range(report.pooled_cm.shape[1])],
        [[ClassLabel(t).token] + report.pooled_cm[t].tolist() for t in range(report.pooled_cm.shape[0])],
    )
    curves = [
        pr_curve(report.oof_labels, report.oof_scores, c, cfg.eval.n_thresholds)
        for c in range(report.oof_scores.shape[1])
    ]
    pr_rows = []
    for curve in curves:
        if curve.empty:
            continue
        for thr, p, r in zip(curve.thresholds, curve.precision, curve.recall):
            pr_rows.append([ClassLabel(curve.class_index).token, thr, p, r])
    _write_csv(run_dir / f"pr_curves{tag}.csv", ["class", "threshold", "precision", "recall"], pr_rows)
    if plots:
        from . import plots as _plots

        _plots.render_pr_curves(curves, run_dir / f"pr_curves{tag}.svg", title=f"PR{tag}")
        _plots.render_confusion_matrix(
            report.pooled_cm, run_dir / f"confusion{tag}.svg", title=f"Confusion{tag}"
        )


def _pipeline_spec(cfg: RunConfig, model: str = "fused") -> PipelineSpec:
    return PipelineSpec(
        model=model,
        preprocess=cfg.preprocess,
        nn=cfg.nn,
        gbt=cfg.gbt,
        baselines=cfg.baselines,
        tap=cfg.eval.tap,
    )


def _synth_table_name(dpi: int) -> str:
    return f"control-denv2-zikv_dpi{dpi}.csv"


def _load_or_synth_tables(args, cfg: RunConfig, dpis: list[int]) -> list[FeatureTable]:
    tables = []
    data_dir = getattr(args, "data_dir", None)
    for dpi in dpis:
        if data_dir:
            tables.append(load_feature_table(Path(data_dir) / _synth_table_name(dpi), dpi))
        else:
            tables.append(synth_feature_table(cfg.synth, dpi))
    return tables


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args, cfg: RunConfig, run_dir: Path) -> None:
    dpis = args.dpi or list(VALID_DPI)
    if args.kind == "table":
        for dpi in dpis:
            table = synth_feature_table(cfg.synth, dpi)
            save_feature_table(table, run_dir / _synth_table_name(dpi))
    else:
        for dpi in dpis:
            for label in ClassLabel:
                rec_cfg = replace(cfg.synth_recording, seed=cfg.synth_recording.seed + dpi)
                rec = synth_recording(rec_cfg, label)
                save_recording(rec, run_dir / f"recording_{label.token.lower()}_dpi{dpi}.msb")


def _cmd_filter(args, cfg: RunConfig, run_dir: Path) -> None:
    rec = load_recording(args.input)
    coeffs = design_highpass_butterworth(order=args.order, fc_hz=args.fc, fs_hz=rec.fs_hz)
    filtered = filter_recording(coeffs, rec)
    save_recording(filtered, run_dir / "filtered.msb")
    freqs = np.logspace(np.log10(1.0), np.log10(rec.fs_hz / 2), 200)
    mags = magnitude_response(coeffs, freqs, rec.fs_hz)
    _write_csv(
        run_dir / "frequency_response.csv",
        ["frequency_hz", "magnitude"],
        [[f, m] for f, m in zip(freqs, mags)],
    )


def _cmd_detect(args, cfg: RunConfig, run_dir: Path) -> None:
    rec = load_recording(args.input)
    if not args.no_filter:
        coeffs = design_highpass_butterworth(fs_hz=rec.fs_hz)
        rec = filter_recording(coeffs, rec)
    train = detect_spikes_recording(
        rec,
        k_sigma=args.k_sigma,
        window_ms=args.window_ms,
        refractory_ms=args.refractory_ms,
    )
    save_spike_train(train, run_dir / "spikes.csv")
    summary = {
        "fs_hz": rec.fs_hz,
        "n_channels": rec.n_channels,
        "n_samples": rec.n_samples,
        "events_per_channel": [ch.n_events for ch in train.channels],
        "whole_trace_sigma": [bool(ch.used_whole_trace_sigma) for ch in train.channels],
    }
    with open(run_dir / "spike_summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _cmd_preprocess(args, cfg: RunConfig, run_dir: Path) -> None:
    table = load_feature_table(args.data, args.dpi)
    fp = fit_pipeline(table, cfg.preprocess)
    save_preprocessor(fp, run_dir / "preprocessor.json")
    transformed = apply_pipeline(fp, table)
    save_feature_table(transformed, run_dir / "transformed.csv")
    report = {
        "n_components": fp.n_components,
        "pre_importance": fp.pre_importance.importance.tolist(),
        "pre_passing": int(fp.pre_importance.n_passing),
        "post_importance": fp.post_importance.importance.tolist(),
        "post_passing": int(fp.post_importance.n_passing),
        "threshold": fp.pre_importance.threshold,
    }
    with open(run_dir / "importance.json", "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _cmd_train(args, cfg: RunConfig, run_dir: Path) -> None:
    table = load_feature_table(args.data, args.dpi)
    plan = stratified_kfold(table, cfg.eval.k, cfg.eval.seed)
    train, val, test = materialize_fold(table, plan, 0)
    fp = fit_pipeline(train, cfg.preprocess)
    save_preprocessor(fp, run_dir / "preprocessor.json")
    tr, va, te = (apply_pipeline(fp, t) for t in (train, val, test))
    nn_cfg = replace(cfg.nn, input_length=tr.n_features)
    net = build_cnn(nn_cfg, seed=cfg.eval.seed)
    net, history = train_cnn(net, tr, va, nn_cfg)
    if cfg.determinism:
        for row in history.epochs:
            row["seconds"] = 0.0
    history.to_csv(run_dir / "history.csv")
    save_cnn(net, run_dir / "cnn.msb")
    if args.model == "fused":
        emb_tr = extract_embeddings(net, tr, cfg.eval.tap)
        ens = fit_gbt(emb_tr, cfg.gbt)
        save_gbt(ens, run_dir / "gbt.json")
        from .gbt import predict_gbt

        scores, pred = predict_gbt(ens, extract_embeddings(net, te, cfg.eval.tap))
    else:
        from .nn import predict_proba

        scores = predict_proba(net, te.features)
        pred = scores.argmax(axis=1)
    from .evaluate import confusion_matrix

    cm = confusion_matrix(te.labels, pred)
    metrics = metrics_from_cm(cm, cfg.eval.averaging)
    with open(run_dir / "test_metrics.json", "w") as fh:
        json.dump(
            {"summary": metrics.summary(), "confusion_matrix": cm.tolist()},
            fh, sort_keys=True, indent=2,
        )
        fh.write("\n")


def _cmd_eval(args, cfg: RunConfig, run_dir: Path) -> None:
    if args.data:
        table = load_feature_table(args.data, args.dpi)
    else:
        table = synth_feature_table(cfg.synth, args.dpi)
    spec = _pipeline_spec(cfg, model=args.method)
    report = cross_validate(table, spec, k=cfg.eval.k, seed=cfg.eval.seed)
    _write_cv_outputs(run_dir, f"_dpi{table.dpi}", report, cfg, args.plots)


def _cmd_compare(args, cfg: RunConfig, run_dir: Path) -> None:
    methods = args.methods.split(",") if args.methods else list(cfg.eval.methods)
    for method in methods:
        if method not in BASELINE_METHODS:
            raise ConfigError(f"unknown method {method!r}; choose from {BASELINE_METHODS}")
    dpis = args.dpi or list(VALID_DPI)
    tables = _load_or_synth_tables(args, cfg, dpis)
    spec = _pipeline_spec(cfg)
    header = ["dpi", "method", "accuracy", "precision", "recall", "f1", "train_seconds"]
    rows = []
    docs = []
    for table in tables:
        comparison = compare_methods(table, methods, k=cfg.eval.k, seed=cfg.eval.seed, spec=spec)
        for row in comparison.grid():
            row["train_seconds"] = _seconds(row["train_seconds"], cfg)
            rows.append([row[h] for h in header])
            docs.append(row)
    _write_csv(run_dir / "comparison_grid.csv", header, rows)
    with open(run_dir / "comparison_grid.json", "w") as fh:
        json.dump(docs, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _cmd_pipeline(args, cfg: RunConfig, run_dir: Path) -> None:
    dpis = args.dpi or list(VALID_DPI)
    tables = _load_or_synth_tables(args, cfg, dpis)
    spec = _pipeline_spec(cfg)
    header = ["dpi", "accuracy", "precision", "recall", "f1", "train_seconds"]
    rows = []
    means = []
    for table in tables:
        report = cross_validate(table, spec, k=cfg.eval.k, seed=cfg.eval.seed)
        _write_cv_outputs(run_dir, f"_dpi{table.dpi}", report, cfg, args.plots)
        mean = dict(report.mean)
        mean["train_seconds"] = _seconds(mean["train_seconds"], cfg)
        means.append(mean)
        rows.append([table.dpi] + [mean[h] for h in header[1:]])
    average = ["average"] + [
        float(np.mean([m[h] for m in means])) for h in header[1:]
    ]
    rows.append(average)
    _write_csv(run_dir / "summary.csv", header, rows)


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="measpike", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"measpike {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file or a previous run's manifest.json")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. --set synth.rows_per_class=500")
        p.add_argument("--out-dir", help="run directory (default: runs/<stamp>-<hash>)")
        p.add_argument("--seed", type=int, help="shortcut for eval.seed and synth.seed")
        p.add_argument("--deterministic", action="store_true",
                       help="byte-identical outputs: serial reductions, zeroed timing columns")
        p.add_argument("--threads", type=int, default=0,
                       help="BLAS thread cap (0 = leave library defaults)")

    p = sub.add_parser("synth", help="emit synthetic dataset CSVs or recordings")
    common(p)
    p.add_argument("--kind", choices=("table", "recording"), default="table")
    p.add_argument("--rows", type=int, help="shortcut for synth.rows_per_class")
    p.add_argument("--sep", type=float, help="shortcut for synth.class_mean_shift")
    p.add_argument("--dpi", type=int, nargs="*", choices=VALID_DPI)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("filter", help="high-pass a recording and dump the response")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--fc", type=float, default=200.0)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("detect", help="spike detection report for a recording")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--no-filter", action="store_true", help="input is already filtered")
    p.add_argument("--k-sigma", type=float, default=8.0)
    p.add_argument("--window-ms", type=float, default=500.0)
    p.add_argument("--refractory-ms", type=float, default=1.0)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("preprocess", help="fit and apply the preprocessing chain")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--dpi", type=int, default=0, choices=VALID_DPI)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="train the network (or the fused stack) on one table")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--dpi", type=int, default=0, choices=VALID_DPI)
    p.add_argument("--model", choices=("cnn", "fused"), default="fused")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="cross-validate one method on one table")
    common(p)
    p.add_argument("--data", help="canonical CSV; omitted: synthesize from config")
    p.add_argument("--dpi", type=int, default=0, choices=VALID_DPI)
    p.add_argument("--method", default="fused", choices=BASELINE_METHODS)
    p.add_argument("--plots", action="store_true", help="also render SVG figures")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", help="method-comparison grid across dpi")
    common(p)
    p.add_argument("--data-dir", help="directory of per-dpi CSVs; omitted: synthesize")
    p.add_argument("--dpi", type=int, nargs="*", choices=VALID_DPI)
    p.add_argument("--methods", help="comma-separated subset (default: all nine)")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("pipeline", help="end-to-end fused run for every dpi plus summary")
    common(p)
    p.add_argument("--data-dir", help="directory of per-dpi CSVs; omitted: synthesize")
    p.add_argument("--dpi", type=int, nargs="*", choices=VALID_DPI)
    p.add_argument("--rows", type=int, help="shortcut for synth.rows_per_class")
    p.add_argument("--sep", type=float, help="shortcut for synth.class_mean_shift")
    p.add_argument("--plots", action="store_true", help="also render SVG figures")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def _apply_shortcuts(args, overrides: list[str]) -> list[str]:
    out = list(overrides)
    if getattr(args, "rows", None) is not None:
        out.append(f"synth.rows_per_class={args.rows}")
    if getattr(args, "sep", None) is not None:
        out.append(f"synth.class_mean_shift={args.sep}")
    if getattr(args, "seed", None) is not None:
        out.append(f"eval.seed={args.seed}")
        out.append(f"synth.seed={args.seed}")
    if args.deterministic:
        out.append("determinism=true")
    return out


def _limit_threads(n: int) -> None:
    if n <= 0:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        pass


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help/--version
        return int(exc.code or 0)

    try:
        cfg = load_config(args.config, _apply_shortcuts(args, args.set))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    _limit_threads(1 if cfg.determinism else args.threads)

    stage = args.command
    try:
        run_dir = _make_run_dir(cfg, args.command, args.out_dir)
        write_manifest(run_dir, args.command, cfg)
        args.func(args, cfg, run_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure in stage {stage!r}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"outputs written to {run_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
