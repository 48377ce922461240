"""Command-line interface: ``hermite-gof {test,fit,sample,type1,power}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .alternatives import parse_alternative, sample_alternative
from .harness import (
    ExperimentConfig,
    IngestError,
    ResultTable,
    emit_table,
    format_report,
    format_table,
    ingest_contingency,
    ingest_pairs,
    load_accidents,
    run_gof_command,
    run_power_experiment,
    run_type1_experiment,
)
from .hermite import BHParams, ParameterError, sample_bhd
from .mle import FitOptions, fit_mle
from .samples import SampleError

log = logging.getLogger("hermite_gof")


def _common(p: argparse.ArgumentParser, seed_default=0) -> None:
    seed_help = "master seed (default %(default)s)" if seed_default is not None else "master seed (default: the config's master_seed)"
    p.add_argument("--seed", type=int, default=seed_default, help=seed_help)
    p.add_argument("--out", type=Path, help="write the result to this file")
    p.add_argument("--format", choices=("csv", "json"), default="json", help="output file format (default json)")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes (default 1)")


def _data_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", type=Path, metavar="FILE", help="CSV of x,y pairs, one per line")
    src.add_argument("--table", type=Path, metavar="FILE", help="contingency matrix (rows Y, columns X)")
    src.add_argument("--accidents", action="store_true", help="use the bundled accident data")


def _lambda3_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--fix-lambda3",
        type=float,
        metavar="V",
        help="pin lambda3 to V during fitting (only 0 is supported); default: lambda3 free",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hermite-gof", description="Goodness-of-fit testing for the bivariate Hermite distribution."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="bootstrap goodness-of-fit test on a data set")
    _data_source(t)
    t.add_argument("--a1", type=float, default=1.0, help="weight exponent a1 (default 1)")
    t.add_argument("--a2", type=float, default=0.0, help="weight exponent a2 (default 0)")
    t.add_argument("--bootstrap", type=int, default=500, metavar="B", help="bootstrap replicates (default 500)")
    t.add_argument("--alpha", type=float, default=0.05, help="level for the printed decision (default 0.05)")
    t.add_argument("--no-refit", action="store_true", help="skip the per-replicate refit (cheaper, not the standard test)")
    _lambda3_flag(t)
    _common(t)

    f = sub.add_parser("fit", help="maximum likelihood fit")
    _data_source(f)
    _lambda3_flag(f)
    _common(f)

    s = sub.add_parser("sample", help="draw a sample from the model or an alternative")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--params", help="mu,sigma2,lambda1,lambda2,lambda3")
    g.add_argument("--alternative", help="alternative spec, e.g. 'BB(1;0.41,0.02,0.01)'")
    s.add_argument("-n", type=int, required=True, help="sample size")
    _common(s)

    for name, helptext in (("type1", "type-I error experiment"), ("power", "power experiment")):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
        e.add_argument("--reps", type=int, help="override reps")
        e.add_argument("--bootstrap", type=int, metavar="B", help="override B")
        _common(e, seed_default=None)
    return parser


def _load(args) -> "BivariateSample":  # noqa: F821
    if args.accidents:
        return load_accidents()
    if args.data is not None:
        return ingest_pairs(args.data)
    return ingest_contingency(args.table)


def _fit_opts(args) -> FitOptions:
    if args.fix_lambda3 is None:
        return FitOptions(seed=args.seed)
    if args.fix_lambda3 != 0:
        raise ValueError("--fix-lambda3 only supports 0: a nonzero lambda3 has no gauge-invariant meaning")
    return FitOptions(fix_lambda3=True, seed=args.seed)


def _write(args, obj: dict, csv_rows: list[dict]) -> None:
    if args.out is None:
        return
    if args.format == "json":
        args.out.write_text(json.dumps(obj, indent=2) + "\n")
    else:
        cols = list(csv_rows[0]) if csv_rows else []
        emit_table(ResultTable(cols, csv_rows, {k: v for k, v in obj.items() if not isinstance(v, list)}), args.out, "csv")


def _cmd_test(args) -> int:
    data = _load(args)
    opts = _fit_opts(args)
    rep = run_gof_command(
        data,
        args.a1,
        args.a2,
        B=args.bootstrap,
        seed=args.seed,
        fix_lambda3=opts.fix_lambda3,
        workers=args.jobs,
        refit=not args.no_refit,
    )
    print(format_report(rep, args.alpha))
    row = {"n": data.n, "a1": args.a1, "a2": args.a2, "v_obs": rep.v_obs, "p_value": rep.p_value,
           "B": rep.B, "B_effective": rep.B_effective, "failures": rep.failures, "seed": args.seed}
    row.update({k: v for k, v in rep.theta_hat.as_dict().items()})
    _write(args, rep.as_dict(), [row])
    return 0


def _cmd_fit(args) -> int:
    data = _load(args)
    res = fit_mle(data, _fit_opts(args))
    th = res.theta_hat
    print(f"n = {data.n}")
    print(f"theta_hat (sigma2 = 1 gauge): {th.as_dict()}")
    print(f"log-likelihood: {res.loglik:.6f}  (start {res.init_loglik:.6f}, {res.iterations} evaluations, "
          f"converged={res.converged})")
    row = dict(th.as_dict(), loglik=res.loglik, iterations=res.iterations, converged=int(res.converged))
    _write(args, res.as_dict(), [row])
    return 0


def _cmd_sample(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.params:
        spec = BHParams(*[float(v) for v in args.params.split(",")])
        data = sample_bhd(spec, args.n, rng)
        label = ",".join(f"{v:g}" for v in spec.as_array())
    else:
        spec = parse_alternative(args.alternative)
        data = sample_alternative(spec, args.n, rng)
        label = spec.label
    if args.out is None:
        for x, y in data.pairs():
            print(f"{x},{y}")
        return 0
    if args.format == "json":
        args.out.write_text(json.dumps({"spec": label, "seed": args.seed, "x": data.x.tolist(), "y": data.y.tolist()}) + "\n")
    else:
        args.out.write_text("x,y\n" + "".join(f"{x},{y}\n" for x, y in data.pairs()))
    return 0


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(args.config, args.command) if args.config is not None else ExperimentConfig(mode=args.command)
    if cfg.mode != args.command:
        raise ValueError(f"config mode {cfg.mode!r} does not match subcommand {args.command!r}")
    overrides = {"workers": args.jobs}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.bootstrap is not None:
        overrides["B"] = args.bootstrap
    cfg = dataclasses.replace(cfg, **overrides)
    run = run_type1_experiment if cfg.mode == "type1" else run_power_experiment
    tbl = run(cfg)
    print(format_table(tbl))
    if args.out is not None:
        emit_table(tbl, args.out, args.format)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"test": _cmd_test, "fit": _cmd_fit, "sample": _cmd_sample, "type1": _cmd_experiment, "power": _cmd_experiment}
    try:
        return handlers[args.command](args)
    except (IngestError, SampleError, ParameterError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
