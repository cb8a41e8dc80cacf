"""Command line front end.

Subcommands cover the pipeline end to end: fit an error model from recorded
bit samples, train a single classifier, run the delay sweep, table the
squared-error decomposition, and recompute summary statistics from a raw
results file. One master ``--seed`` pins every random draw a subcommand
makes, so repeated invocations write byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from ntvsim.dataset import load_wdbc
from ntvsim.errormodel import fit, model_to_json, read_samples, save_model
from ntvsim.errors import NtvsimError, ParseError
from ntvsim.forest import config_from_json, save_forest, train_forest
from ntvsim.harness import (
    JITTER_SIGMA,
    SweepConfig,
    decomposition_table,
    decomposition_text,
    default_profile,
    load_profile,
    read_results,
    run_sweep,
    summarize,
    summary_text,
    write_results,
)
from ntvsim.svm import SvmConfig, save_svm, train_svm

RESULTS_NAME = "results.csv"
SUMMARY_NAME = "summary.csv"
RATES_NAME = "rates.csv"


def _load_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc


def _svm_config_from_json(doc: dict) -> SvmConfig:
    known = set(SvmConfig.__dataclass_fields__)
    extra = set(doc) - known
    if extra:
        raise ParseError(f"unknown svm config fields: {sorted(extra)}")
    return SvmConfig(**doc)


def _cmd_fit_error_model(args) -> int:
    samples = read_samples(args.samples)
    model = fit(samples)
    if args.out:
        save_model(model, args.out)
        print(
            f"fitted {samples.shape[1]}-bit error model "
            f"from {samples.shape[0]} samples -> {args.out}"
        )
    else:
        print(json.dumps(model_to_json(model), indent=2))
    return 0


def _cmd_train(args) -> int:
    ds = load_wdbc(args.data)
    overrides = _load_json(args.config) if args.config else {}
    rng = np.random.default_rng(args.seed)
    out = args.out if args.out else f"{args.kind}_model.json"
    if args.kind == "rf":
        cfg = config_from_json(overrides)
        model = train_forest(ds, cfg, rng)
        save_forest(model, out)
        print(
            f"trained {cfg.n_trees}-tree forest, "
            f"mean oob accuracy {model.oob_accuracy.mean():.4f} -> {out}"
        )
    else:
        cfg = _svm_config_from_json(overrides)
        model = train_svm(ds, cfg, rng)
        save_svm(model, out)
        print(f"trained svm with {model.support.shape[0]} support vectors -> {out}")
    return 0


def _cmd_sweep(args) -> int:
    ds = load_wdbc(args.data)
    profile = load_profile(args.profile) if args.profile else default_profile()
    cfg = SweepConfig(
        n_instances=args.instances,
        n_trees=args.trees,
        ratio=args.ratio,
        seed=args.seed,
        jitter_sigma=args.jitter,
        workers=args.workers,
    )
    result = run_sweep(cfg, ds, profile)
    os.makedirs(args.out_dir, exist_ok=True)
    write_results(
        result,
        os.path.join(args.out_dir, RESULTS_NAME),
        os.path.join(args.out_dir, SUMMARY_NAME),
        os.path.join(args.out_dir, RATES_NAME),
    )
    sys.stdout.write(summary_text(result.summary))
    return 0


def _cmd_decompose(args) -> int:
    ds = load_wdbc(args.data)
    try:
        l_values = [int(tok) for tok in args.L_list.split(",")]
    except ValueError as exc:
        raise ParseError(
            f"--L-list must be comma-separated integers, got {args.L_list!r}"
        ) from exc
    profile = load_profile(args.profile) if args.profile else None
    rows = decomposition_table(
        ds,
        l_values,
        profile=profile,
        delay_variation=args.delay,
        include_diverse=args.diversity,
        n_resamples=args.resamples,
        n_error_draws=args.draws,
        seed=args.seed,
    )
    text = decomposition_text(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {len(rows)} decomposition rows -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_report(args) -> int:
    rows = read_results(args.results)
    sys.stdout.write(summary_text(summarize(rows)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntvsim",
        description="Fixed-point classifier ensembles under timing-error injection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "fit-error-model", help="fit a bit-flip model from recorded samples"
    )
    p.add_argument("samples", help="CSV of 0/1 rows, one column per bit, LSB first")
    p.add_argument("--out", help="write the model JSON here instead of stdout")
    p.set_defaults(func=_cmd_fit_error_model)

    p = sub.add_parser("train", help="train one classifier on a dataset file")
    p.add_argument("kind", choices=("rf", "svm"))
    p.add_argument("data", help="dataset CSV (id, M/B diagnosis, 30 features)")
    p.add_argument("--config", help="JSON file of config field overrides")
    p.add_argument("--out", help="model file (default <kind>_model.json)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser(
        "sweep", help="classify under injected errors across all delay points"
    )
    p.add_argument("data", help="dataset CSV (id, M/B diagnosis, 30 features)")
    p.add_argument("--profile", help="error profile JSON (default: bundled synthetic)")
    p.add_argument("--instances", type=int, default=30, help="instances per delay point")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--trees", type=int, default=10, help="ensemble size")
    p.add_argument("--ratio", type=float, default=0.5, help="train fraction of the split")
    p.add_argument(
        "--jitter", type=float, default=JITTER_SIGMA,
        help="lognormal sigma of per-instance rate jitter",
    )
    p.add_argument("--workers", type=int, default=1, help="worker threads")
    p.add_argument(
        "--out-dir", default=".",
        help=f"directory for {RESULTS_NAME}, {SUMMARY_NAME}, {RATES_NAME}",
    )
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser(
        "decompose", help="noise/bias/variance table of the ensemble-average output"
    )
    p.add_argument("data", help="dataset CSV (id, M/B diagnosis, 30 features)")
    p.add_argument(
        "--L-list", default="1,5,10,25", help="comma-separated ensemble sizes"
    )
    p.add_argument(
        "--diversity", action="store_true",
        help="add a mixed-precision row per ensemble size",
    )
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument(
        "--delay", type=float, default=0.29,
        help="profile point to inject at (0 disables injection)",
    )
    p.add_argument("--profile", help="error profile JSON (default: bundled synthetic)")
    p.add_argument("--resamples", type=int, default=20, help="training resamples")
    p.add_argument("--draws", type=int, default=5, help="error draws per resample")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("report", help="recompute summary statistics from raw rows")
    p.add_argument("results", help=f"{RESULTS_NAME}-schema file")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NtvsimError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
