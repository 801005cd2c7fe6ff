"""Command-line entry point: ``posthoc-bench {synth,label,train,cv,sweep,marginalize}``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .harness import (
    MARGINAL_HEADER,
    ConfigPoint,
    SweepConfig,
    SweepResult,
    load_config,
    load_results,
    marginal_rows,
    marginalize,
    result_rows,
    run_cv,
    run_sweep,
)
from .labeling import NoiseSpec, with_label_noise
from .pipeline import make_projection, prepare_recording, preprocess
from .source_space import synth_lead_field, synth_recording
from .spoc import correlation_metric, pattern_angle, spoc_predict, spoc_train

log = logging.getLogger("posthoc_bench")


def parse_band(text):
    try:
        low, high = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LOW:HIGH, got {text!r}") from None
    return (low, high)


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


DEFAULTS = {"seed": 0, "band": (8.0, 12.0), "window_s": 1.0, "p2p_uv": 80.0, "mne_lambda": 1.0}


def _common(p):
    # None marks "not given" so that flags can override a config file
    p.add_argument("--seed", type=int)
    p.add_argument("--band", type=parse_band, metavar="LOW:HIGH", help="default 8:12")
    p.add_argument("--window-s", type=float, help="epoch length, default 1.0")
    p.add_argument("--p2p-uv", type=float, help="artifact peak-to-peak threshold, default 80")
    p.add_argument("--config", type=Path, help="key = value sweep configuration file")


def _resolve(args, config=None):
    """Fill unset flags from ``config`` (if any), then from DEFAULTS."""
    for name, default in DEFAULTS.items():
        if getattr(args, name, default) is None:
            setattr(args, name, getattr(config, name) if config is not None else default)


def _recording_args(p):
    p.add_argument("--recording", type=Path, required=True, help="recording .phlb file")
    p.add_argument("--leadfield", type=Path, help="lead field .phlb (anatomical projection)")
    p.add_argument("--ica", type=int, metavar="N", help="use N fastICA components instead")
    p.add_argument("--components", type=_int_list, help="ICA components to keep, e.g. 0,2,5")
    p.add_argument("--mne-lambda", type=float)
    p.add_argument("--preprocess", action="store_true",
                   help="0.2-48 Hz filter, resample to 120 Hz, common average reference")
    p.add_argument("--no-artifacts", action="store_true", help="skip artifact marking")


def build_parser():
    parser = argparse.ArgumentParser(prog="posthoc-bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate lead field, recording and ground truth")
    _common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n-channels", type=int, default=31)
    p.add_argument("--n-sources", type=int, default=50)
    p.add_argument("--duration-s", type=float, default=1100.0)
    p.add_argument("--sample-rate", type=float, default=120.0)
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--target-index", type=int, default=0)

    p = sub.add_parser("label", help="post-hoc label a recording into a dataset folder")
    _common(p)
    _recording_args(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--source-index", type=int)
    group.add_argument("--quantile", type=float, help="relative source power in [0, 1]")
    group.add_argument("--random-source", action="store_true")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", help="fit SPoC on a dataset and report training metrics")
    _common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--shrinkage", type=float, default=1e-8)
    p.add_argument("--out", type=Path, help="model CSV")

    p = sub.add_parser("cv", help="chronological cross-validation on a dataset")
    _common(p)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--n-epochs", type=int, help="first N good epochs only")
    p.add_argument("--shrinkage", type=float, default=1e-8)
    p.add_argument("--results", type=Path, help="results CSV")

    p = sub.add_parser("sweep", help="dataset size x label noise x source power sweep")
    _common(p)
    _recording_args(p)
    p.add_argument("--budget", type=int, help="override evaluation_budget")
    p.add_argument("--n-jobs", type=int, help="override n_jobs")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--recording-id", default="rec0")

    p = sub.add_parser("marginalize", help="aggregate a results CSV along one dimension")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--dimension", choices=["n_epochs", "xi", "rel_power"], required=True)
    p.add_argument("--out", type=Path, help="write CSV here instead of stdout")
    return parser


def _write_rows(path, header, rows):
    fh = sys.stdout if path is None else open(path, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if path is not None:
            fh.close()


def cmd_synth(args):
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    lf = synth_lead_field(args.n_channels, args.n_sources, args.seed)
    x, truth = synth_recording(
        lf, args.duration_s, args.sample_rate, args.band, args.target_index, args.snr_db, args.seed
    )
    io.save_lead_field(out / "leadfield.phlb", lf)
    io.save_recording(out / "recording.phlb", x)
    io.write_matrix(out / "truth_envelope.phlb", truth.true_envelope[None, :])
    io.write_matrix(out / "truth_pattern.phlb", truth.true_pattern[:, None])
    io.write_meta(
        out / "truth.meta",
        {
            "target_source_index": truth.target_source_index,
            "snr_db": repr(truth.snr_db),
            "noise_sigma": repr(truth.noise_sigma),
            "band_low": repr(truth.target_band[0]),
            "band_high": repr(truth.target_band[1]),
            "seed": args.seed,
        },
    )
    print(f"wrote {x.n_channels} x {x.n_samples} recording and {lf.n_sources}-source lead field to {out}")


def _prepared(args, config):
    x = io.load_recording(args.recording)
    lead_field = io.load_lead_field(args.leadfield) if args.leadfield else None
    if args.preprocess:
        x = preprocess(x)
        if lead_field is not None:
            lead_field = lead_field.average_referenced()
    if args.ica is not None:
        kind, n_comp = "data-driven", args.ica
    elif config is not None:
        kind, n_comp = config.projection_kind, config.n_ica_components
    else:
        kind, n_comp = ("anatomical" if lead_field is not None else "data-driven"), 20
    projection = make_projection(
        x, kind, lead_field=lead_field, mne_lambda=args.mne_lambda,
        n_components=n_comp, components=args.components, seed=args.seed,
    )
    return prepare_recording(
        x, projection, args.band, args.window_s, args.p2p_uv * 1e-6,
        recording_id=getattr(args, "recording_id", "rec0"),
        detect_artifacts=not args.no_artifacts,
    )


def cmd_label(args):
    prepared = _prepared(args, None)
    if args.source_index is not None:
        index = prepared.select(index=args.source_index)
    elif args.quantile is not None:
        index = prepared.select(quantile=args.quantile)
    else:
        index = prepared.select(seed=args.seed)
    dataset = prepared.dataset(index)
    io.save_dataset(args.out, dataset)
    print(
        f"source {index} (relative power {prepared.relative_power[index]:.3f}): "
        f"{len(dataset)} epochs, {dataset.n_good} good -> {args.out}"
    )


def _fmt_deg(alpha):
    return "n/a" if math.isnan(alpha) else f"{np.degrees(alpha):.2f} deg"


def cmd_train(args):
    dataset = io.load_dataset(args.dataset)
    model = spoc_train(dataset, args.shrinkage)
    good = dataset.good()
    rho = correlation_metric(spoc_predict(model, good.epochs), good.labels)
    alpha = math.nan
    if dataset.ground_truth_pattern is not None:
        alpha = pattern_angle(dataset.ground_truth_pattern, model.pattern)
    if args.out:
        io.save_model(args.out, model)
    print(f"eigenvalue {model.eigenvalue:.6g}  training rho {rho:.4f}  alpha {_fmt_deg(alpha)}")


def cmd_cv(args):
    dataset = io.load_dataset(args.dataset)
    if args.n_epochs is not None:
        dataset = dataset.first_good(args.n_epochs)
    dataset = with_label_noise(dataset, NoiseSpec(args.xi, args.seed))
    cv = run_cv(dataset, args.k, args.shrinkage)
    rel = dataset.source.relative_power if dataset.source is not None else math.nan
    result = SweepResult(
        ConfigPoint(0, dataset.n_good, float(args.xi), rel),
        cv.mean_rho,
        cv.mean_alpha_rad,
        tuple(f.rho for f in cv.folds),
        tuple(f.alpha_rad for f in cv.folds),
        args.seed,
    )
    if args.results:
        _write_rows(args.results, io.RESULTS_HEADER, result_rows(result))
    print(
        f"mean rho {cv.mean_rho:.4f}  pooled rho {cv.pooled_rho:.4f}  "
        f"mean alpha {_fmt_deg(cv.mean_alpha_rad)}"
    )


def cmd_sweep(args):
    config = load_config(args.config) if args.config else SweepConfig()
    overrides = {
        name: getattr(args, name) for name in DEFAULTS if getattr(args, name) is not None
    }
    if args.budget is not None:
        overrides["evaluation_budget"] = args.budget
    if args.n_jobs is not None:
        overrides["n_jobs"] = args.n_jobs
    if args.ica is not None:
        overrides.update(projection_kind="data-driven", n_ica_components=args.ica)
    config = replace(config, **overrides)
    _resolve(args, config)
    prepared = _prepared(args, config)
    results = run_sweep(config, prepared, args.results)
    print(f"{len(results)} configurations evaluated -> {args.results}")


def cmd_marginalize(args):
    marginals = marginalize(load_results(args.results), args.dimension)
    _write_rows(args.out, [args.dimension] + MARGINAL_HEADER[1:], marginal_rows(marginals))


COMMANDS = {
    "synth": cmd_synth,
    "label": cmd_label,
    "train": cmd_train,
    "cv": cmd_cv,
    "sweep": cmd_sweep,
    "marginalize": cmd_marginalize,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command not in ("sweep", "marginalize"):
        _resolve(args, load_config(args.config) if getattr(args, "config", None) else None)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
