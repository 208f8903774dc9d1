"""Command-line entry point: ``gridpop <subcommand> [options]``.

Every option can also be set in a ``key = value`` config file passed with
``--config``; flags override the file, which overrides built-in defaults.
Each output file starts with a ``# gridpop digest=... seed=...`` line.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import RunConfig, read_config_file, resolve
from .evaluate import (
    EvaluationReport,
    forecast_correlation,
    lfu_order,
    lru_order,
    occupancy_cdf,
    removal_curve,
    rolling_windows,
    saved_space_curve,
    FORECAST_MODELS,
)
from .features import FEATURE_NAMES, extract_features, feature_matrix, label_examples
from .forest import load_model, save_model, train
from .report import load_evaluation, provenance, render_report, write_csv, write_evaluation
from .simulate import POLICIES, simulate
from .smoothing import alpha_grid, aligned_history, fit_alpha_batch
from .synthetic import generate_synthetic
from .trace import Trace, export_trace, import_trace

log = logging.getLogger("gridpop")


class CliError(Exception):
    pass


def _add_trace_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--events", help="events CSV (dataset_id,week,count)")
    p.add_argument("--metas", help="metas CSV")


def _add_window_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-end", type=int, dest="train_end")
    p.add_argument("--valid-end", type=int, dest="valid_end")
    p.add_argument("--label-weeks", type=int, dest="label_weeks")


def _add_forest_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-trees", type=int, dest="n_trees")
    p.add_argument("--max-depth", type=int, dest="max_depth")
    p.add_argument("--min-samples-leaf", type=int, dest="min_samples_leaf")
    p.add_argument("--features-per-split", type=int, dest="features_per_split")


def _add_sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--capacity", type=int, dest="capacity_bytes", help="disk capacity in bytes")
    p.add_argument("--capacity-fraction", type=float, dest="capacity_fraction")
    p.add_argument("--max-replicas", type=int, dest="max_replicas")
    p.add_argument("--purge-threshold", type=float, dest="purge_threshold")
    p.add_argument("--purge-every", type=int, dest="purge_every", help="weeks between long-term purges")
    p.add_argument("--start-week", type=int, dest="start_week")
    p.add_argument("--alpha-step", type=float, dest="alpha_step")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gridpop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("generate", parents=[common], help="write a seeded synthetic trace")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-datasets", type=int, dest="n_datasets")
    p.add_argument("--horizon-weeks", type=int, dest="horizon_weeks")

    p = sub.add_parser("features", parents=[common], help="per-dataset feature CSV")
    _add_trace_args(p)
    p.add_argument("--window-end", type=int, required=True, dest="window_end")
    p.add_argument("--label-start", type=int, dest="label_start", help="add a label column")
    p.add_argument("--label-weeks", type=int, dest="label_weeks")
    p.add_argument("--out", required=True, help="output CSV")

    p = sub.add_parser("train", parents=[common], help="train the popularity forest")
    _add_trace_args(p)
    _add_window_args(p)
    _add_forest_args(p)
    p.add_argument("--model", help="model file to write")

    p = sub.add_parser("predict", parents=[common], help="access probabilities from a model")
    _add_trace_args(p)
    p.add_argument("--model")
    p.add_argument("--window-end", type=int, dest="window_end", help="default: valid_end")
    p.add_argument("--out", required=True, help="output CSV")

    p = sub.add_parser("forecast", parents=[common], help="short-term access forecasts")
    _add_trace_args(p)
    p.add_argument("--week", type=int, help="forecast week (history before it is used); default: horizon")
    p.add_argument("--alpha-step", type=float, dest="alpha_step")
    p.add_argument("--out", required=True, help="output CSV")

    p = sub.add_parser("simulate", parents=[common], help="replay the trace against a storage policy")
    _add_trace_args(p)
    _add_window_args(p)
    _add_sim_args(p)
    p.add_argument("--model", help="forest model; enables long-term purges")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("evaluate", parents=[common], help="curve, correlation and CDF CSVs")
    _add_trace_args(p)
    _add_window_args(p)
    _add_sim_args(p)
    p.add_argument("--model")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", parents=[common], help="summarise evaluate outputs into report.txt")
    p.add_argument("--out", required=True, help="directory holding the evaluate outputs")
    return parser


_NOT_CONFIG = {"command", "config", "verbose", "window_end", "label_start", "week"}


def _config(args: argparse.Namespace) -> RunConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
    return resolve(file_values, overrides)


def _trace(cfg: RunConfig) -> Trace:
    if not cfg.events or not cfg.metas:
        raise CliError("--events and --metas are required")
    return import_trace(cfg.events, cfg.metas)


def _stamp(cfg: RunConfig) -> str:
    return provenance(cfg.digest({"events": cfg.events, "metas": cfg.metas, "model": cfg.model}), cfg.seed)


def _model(cfg: RunConfig):
    if not cfg.model or not Path(cfg.model).is_file():
        raise CliError(f"model not found: {cfg.model or '(no --model given)'}")
    return load_model(cfg.model)


def cmd_generate(cfg: RunConfig, args) -> None:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = generate_synthetic(cfg.synth_config(), cfg.seed)
    stamp = provenance(cfg.digest(), cfg.seed)
    export_trace(trace, out / "events.csv", out / "metas.csv", comment=stamp)
    write_csv(out / "classes.csv", ("dataset_id", "class"), sorted(trace.classes.items()), stamp)
    log.info("wrote %d datasets, %d events to %s", len(trace.metas), len(trace.events), out)


def cmd_features(cfg: RunConfig, args) -> None:
    trace = _trace(cfg)
    feats = extract_features(trace, args.window_end)
    header = ("dataset_id",) + FEATURE_NAMES
    if args.label_start is not None:
        labeled = label_examples(feats, trace, args.label_start, cfg.label_weeks)
        rows = ((e.dataset_id,) + e.features.values() + (e.label,) for e in labeled)
        header += ("label",)
    else:
        rows = ((f.dataset_id,) + f.values() for f in feats)
    write_csv(cfg.out, header, rows, _stamp(cfg))


def cmd_train(cfg: RunConfig, args) -> None:
    if not cfg.model:
        raise CliError("--model is required")
    trace = _trace(cfg)
    windows = rolling_windows(trace, cfg.train_end, cfg.valid_end, cfg.label_weeks)
    model = train(windows.train, cfg.forest_params(), cfg.seed)
    stamp = provenance(cfg.digest({"events": cfg.events, "metas": cfg.metas}), cfg.seed)
    save_model(model, cfg.model, comment=stamp)
    imp = ", ".join(f"{n}={v:.3f}" for n, v in zip(FEATURE_NAMES, model.importances))
    log.info("trained %d trees; importances: %s", len(model.trees), imp)


def cmd_predict(cfg: RunConfig, args) -> None:
    model = _model(cfg)
    trace = _trace(cfg)
    end = cfg.valid_end if args.window_end is None else args.window_end
    feats = extract_features(trace, end)
    probs = model.predict_proba_matrix(feature_matrix(feats)) if feats else []
    rows = ((f.dataset_id, float(p)) for f, p in zip(feats, probs))
    write_csv(cfg.out, ("dataset_id", "probability"), rows, _stamp(cfg))


def cmd_forecast(cfg: RunConfig, args) -> None:
    trace = _trace(cfg)
    week = trace.horizon_weeks if args.week is None else args.week
    if not 0 < week <= trace.horizon_weeks:
        raise CliError(f"--week must lie in (0, {trace.horizon_weeks}]")
    creation = np.asarray(trace.creation_weeks)
    keep = np.flatnonzero(creation < week)
    rows = []
    if len(keep):
        Y, lengths = aligned_history(trace.counts[keep], creation[keep], week)
        alpha, nxt, _ = fit_alpha_batch(Y, lengths, alpha_grid(cfg.alpha_step))
        ids = trace.dataset_ids
        rows = [(ids[i], float(a), float(f), 4 * float(f)) for i, a, f in zip(keep, alpha, nxt)]
    write_csv(
        cfg.out, ("dataset_id", "alpha", "next_week_forecast", "four_week_forecast"), rows, _stamp(cfg)
    )


def cmd_simulate(cfg: RunConfig, args) -> None:
    trace = _trace(cfg)
    model = _model(cfg) if cfg.model else None
    result = simulate(trace, cfg.sim_config(), model)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stamp = _stamp(cfg)
    write_csv(
        out / "actions.csv",
        ("week", "dataset_id", "action", "bytes_delta"),
        ((r.week, r.dataset_id, r.action, r.bytes_delta) for r in result.log),
        stamp,
    )
    final = result.final
    write_csv(
        out / "final_state.csv",
        ("dataset_id", "size_bytes", "n_replicas", "forecast", "metric"),
        (
            (ds, final.sizes[ds], n, final.forecast(ds), final.metric(ds) if n >= 1 else "")
            for ds, n in sorted(final.replicas.items())
        ),
        stamp,
    )
    log.info(
        "simulated %d weeks: %d actions, %d restores, final used %d / %d bytes",
        len(result.weekly_used), len(result.log), result.restores, final.used_bytes, final.capacity_bytes,
    )


def run_evaluation(cfg: RunConfig, trace: Trace, model=None) -> EvaluationReport:
    """Curves on the validation window, walk-forward correlations, and the CDF of a simulated run."""
    windows = rolling_windows(trace, cfg.train_end, cfg.valid_end, cfg.label_weeks)
    val = windows.validation
    truth = {e.dataset_id: e.label for e in val}
    sizes = {e.dataset_id: e.features.size_bytes for e in val}
    feats = [e.features for e in val]
    curve = []
    if model is not None:
        probs = model.predict_proba_matrix(feature_matrix(feats))
        curve += saved_space_curve(dict(zip(truth, map(float, probs))), truth, sizes, "forest")
    curve += removal_curve(lru_order(feats), truth, sizes, "lru")
    curve += removal_curve(lfu_order(feats), truth, sizes, "lfu")

    weeks = range(cfg.valid_end, trace.horizon_weeks)
    alphas = alpha_grid(cfg.alpha_step)
    corr = {m: forecast_correlation(trace, m, weeks, alphas) for m in FORECAST_MODELS}

    sim = simulate(trace, cfg.sim_config(), model)
    cdf = occupancy_cdf(sim.final)
    meta = {
        "seed": str(cfg.seed),
        "windows": f"0-{cfg.train_end}/{cfg.valid_end}-{cfg.valid_end + cfg.label_weeks}",
        "policy": cfg.policy,
        "restores": str(sim.restores),
    }
    return EvaluationReport(curve, corr, cdf, meta)


def cmd_evaluate(cfg: RunConfig, args) -> None:
    model = _model(cfg) if (cfg.policy == "metric_m" or cfg.model) else None
    trace = _trace(cfg)
    report = run_evaluation(cfg, trace, model)
    stamp = _stamp(cfg)
    write_evaluation(report, cfg.out, stamp)
    (Path(cfg.out) / "report.txt").write_text(render_report(report, stamp), encoding="utf-8")


def cmd_report(cfg: RunConfig, args) -> None:
    report, stamp = load_evaluation(cfg.out)
    meta = {"sources": "curve.csv, correlation.csv, cdf.csv"}
    (Path(cfg.out) / "report.txt").write_text(render_report(report, stamp, meta), encoding="utf-8")


COMMANDS = {
    "generate": cmd_generate,
    "features": cmd_features,
    "train": cmd_train,
    "predict": cmd_predict,
    "forecast": cmd_forecast,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s"
    )
    try:
        cfg = _config(args)
        COMMANDS[args.command](cfg, args)
    except (CliError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"gridpop {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
