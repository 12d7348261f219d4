"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .baselines import GeneratorSpec, fit_generator
from .dataset import (
    SplitSpec,
    TableSchema,
    encode,
    fit_encoder,
    load_csv,
    preprocess_trips,
    split,
)
from .errors import TripEvalError
from .harness import ExperimentConfig, dumps_report, run_experiment
from .privacy import DcrProfile, dcr_profile, rdcr_sweep, sweep_csv
from .report import render_report, render_sweep_csv

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_preprocess(args) -> None:
    schema = TableSchema.load(args.schema)
    table, stats = preprocess_trips(
        load_csv(args.inp, schema), _csv_list(args.drop), _csv_list(args.datetime),
        return_stats=True,
    )
    table.to_csv(args.out)
    table.schema.save(args.schema_out or f"{args.out}.schema.json")
    print(f"rows in {stats.rows_in}, rows out {stats.rows_out}, removed {stats.rows_removed}",
          file=sys.stderr)


def cmd_split(args) -> None:
    schema = TableSchema.load(args.schema)
    train, holdout = split(load_csv(args.inp, schema),
                           SplitSpec(args.train_size, args.holdout_size, args.seed))
    train.to_csv(args.train_out)
    holdout.to_csv(args.holdout_out)


def cmd_generate(args) -> None:
    schema = TableSchema.load(args.schema)
    train = load_csv(args.train, schema)
    gen = fit_generator(train, GeneratorSpec(args.kind, args.noise_sigma, args.seed))
    gen.sample(args.n, args.seed).to_csv(args.out)


def cmd_evaluate(args) -> None:
    cfg = ExperimentConfig.load(args.config)
    _write(dumps_report(run_experiment(cfg)), args.out)


def cmd_report(args) -> None:
    with open(args.inp, encoding="utf-8") as f:
        report = json.load(f)
    _write(render_report(report, args.format), args.out)
    if args.sweep_dir:
        out = Path(args.sweep_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, gen in report["generators"].items():
            if gen.get("sweep"):
                (out / f"sweep_{name}.csv").write_text(render_sweep_csv(report, name))


def cmd_dcr(args) -> None:
    schema = TableSchema.load(args.schema)
    train = load_csv(args.train, schema)
    enc = fit_encoder(train)
    profile = dcr_profile(
        encode(train, enc),
        encode(load_csv(args.holdout, schema), enc),
        encode(load_csv(args.synth, schema), enc),
    )
    profile.save(args.out)


def cmd_sweep(args) -> None:
    profile = DcrProfile.load(args.profile)
    alphas = [float(a) for a in _csv_list(args.alphas)]
    _write(sweep_csv(rdcr_sweep(profile, alphas)), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tripeval", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("preprocess", help="drop columns, expand datetimes, remove incomplete rows")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--schema-out", help="where to write the output schema (default OUT.schema.json)")
    s.add_argument("--drop", default="Ehail_fee", help="comma-separated columns to drop")
    s.add_argument("--datetime", default="", help="comma-separated datetime columns")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("split", help="seeded train/holdout split")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--train-size", type=int, required=True)
    s.add_argument("--holdout-size", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--train-out", default="train.csv")
    s.add_argument("--holdout-out", default="holdout.csv")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("generate", help="fit a baseline generator and sample a table")
    s.add_argument("--kind", required=True,
                   choices=["gaussian_copula", "independent_marginals", "noisy_memorizer"])
    s.add_argument("--train", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-sigma", type=float, default=0.01)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("evaluate", help="run the full experiment protocol")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="report JSON path (default stdout)")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", help="render a report JSON")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--format", choices=["json", "markdown", "csv"], default="markdown")
    s.add_argument("--out")
    s.add_argument("--sweep-dir", help="also write per-generator rDCR sweep CSVs here")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("dcr", help="compute a DCR profile JSON")
    s.add_argument("--train", required=True)
    s.add_argument("--holdout", required=True)
    s.add_argument("--synth", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dcr)

    s = sub.add_parser("sweep", help="rDCR over a list of percentiles")
    s.add_argument("--profile", required=True)
    s.add_argument("--alphas", default="0.5,1,2,5,10,25,50")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except TripEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ArithmeticError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
