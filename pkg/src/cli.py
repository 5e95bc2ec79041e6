"""Command-line surface: fit, gof, simulate, verify and bench.

Exit codes: 0 success, 1 usage error, 2 data error, 3 precision or
structural error (including a failed ``verify`` check).
"""

import argparse
import json
import logging
import sys
from typing import Callable, List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.api.schemas.fit import FitConfig
from src.api.schemas.gof import GofConfig
from src.api.schemas.params import ExtNBParams, NBParams, PoissonParams
from src.config import get_settings
from src.logging_config import configure_logging
from src.services import bench, theory_checks
from src.services.apma import fit_ext_nb, fit_nb, fit_poisson
from src.services.dataset_io import (
    DatasetFormat,
    fit_document,
    gof_document,
    infer_format,
    poisson_document,
    read_dataset,
    write_result,
)
from src.services.distributions import ConversionError, law_sample
from src.services.gof import bootstrap_test
from src.services.limits import PrecisionError, StructuralError
from src.services.rng import child_rng, fresh_seed
from src.services.sufficient_stats import SampleError

logger = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PRECISION = 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors instead of exiting with 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _require_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    if args.json:
        raise UsageError("--seed is required with --json so the output can be replayed")
    seed = fresh_seed()
    logger.info(f"no --seed given, using {seed}")
    return seed


def _load(args):
    fmt = DatasetFormat(args.format) if args.format else infer_format(args.input)
    if args.input == "-":
        return read_dataset(sys.stdin, fmt)
    return read_dataset(args.input, fmt)


def _from_flags(what: str, build: Callable, *positional, **kwargs):
    """Build a validated model from command-line values; range errors are usage errors."""
    try:
        return build(*positional, **kwargs)
    except ValidationError as e:
        raise UsageError(f"invalid {what}: {e.errors()[0]['msg']}") from e


def _fit_config(args) -> FitConfig:
    return _from_flags("fit options", FitConfig.from_settings, nu_max=args.nu_max, epsilon=args.epsilon, delta=args.delta)


def _print_frame(frame: pd.DataFrame, as_json: bool) -> None:
    if as_json:
        records = frame.astype(object).where(frame.notna(), None).to_dict(orient="records")
        print(json.dumps(records, sort_keys=True, indent=2, allow_nan=False, default=_json_scalar))
    else:
        with pd.option_context("display.max_rows", None, "display.width", 200):
            print(frame.to_string(index=False))


def _json_scalar(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _print_document(doc) -> None:
    print(f"model      {doc.model}")
    print(f"branch     {doc.branch}")
    for key, value in doc.estimates.items():
        print(f"{key:<10} {value:.6g}")
    print(f"loglik     {doc.loglik:.6f}")
    print(f"boundary   {doc.at_boundary}")
    if doc.gof is not None:
        print(f"D_n        {doc.gof.D_n:.6g}")
        print(f"d_n        {doc.gof.d_n:.6g}")
        print(f"p_value    {doc.gof.p_value:.6g}")
        print(f"reject     {doc.gof.reject}")
        print(f"seed       {doc.gof.seed}")


# Subcommands

def cmd_fit(args) -> int:
    sample = _load(args)
    cfg = _fit_config(args)

    if args.model == "poisson":
        lam, loglik = fit_poisson(sample)
        doc = poisson_document(sample, lam, loglik)
    else:
        fit = fit_ext_nb(sample, cfg) if args.model == "enb" else fit_nb(sample, cfg)
        if fit.warning:
            logger.warning(fit.warning)
        doc = fit_document(sample, fit, cfg)

    if args.json:
        sys.stdout.write(write_result(doc))
    else:
        _print_document(doc)
    return EXIT_OK


def cmd_gof(args) -> int:
    seed = _require_seed(args)
    sample = _load(args)
    cfg = _from_flags(
        "gof options",
        GofConfig.from_settings,
        seed,
        boot_reps=args.boot,
        level=args.level,
        model=args.model,
        workers=args.threads,
        fit_cfg=_fit_config(args),
    )
    result = bootstrap_test(sample, cfg)
    if result.fitted.warning:
        logger.warning(result.fitted.warning)

    doc = gof_document(sample, result, cfg.fit_cfg)
    if args.json:
        sys.stdout.write(write_result(doc))
    else:
        _print_document(doc)
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = _require_seed(args)
    if args.dist == "pois":
        params = _from_flags(f"--{args.dist} parameters", PoissonParams, lam=args.lam)
    elif args.dist == "nb":
        params = _from_flags(f"--{args.dist} parameters", NBParams, nu=args.nu, p=args.p)
    else:
        params = _from_flags(f"--{args.dist} parameters", ExtNBParams, mu=args.mu, p=args.p)

    values = law_sample(params, args.n, child_rng(seed))
    if args.json:
        payload = {
            "dist": args.dist,
            "params": params.model_dump(by_alias=True),
            "n": args.n,
            "seed": seed,
            "values": values.tolist(),
        }
        print(json.dumps(payload, sort_keys=True, allow_nan=False))
    else:
        print(" ".join(str(v) for v in values.tolist()))
    return EXIT_OK


def cmd_verify(args) -> int:
    nu_grid = theory_checks.default_nu_grid(args.nu_points, args.nu_lo, args.nu_hi)
    if args.check == "g-limits":
        frame = theory_checks.check_g_limits(_require_seed(args), samples=args.samples)
    elif args.check == "G-positivity":
        frame = theory_checks.check_G_positivity(args.lambdas, nu_grid)
    elif args.check == "diff-profile":
        frame = theory_checks.check_diff_profile(args.lambdas, nu_grid)
    else:
        cfg = GofConfig.from_settings(_require_seed(args), boot_reps=args.boot, workers=args.threads)
        frame = theory_checks.check_ks_collapse(args.lambdas[0], args.n_grid, args.reps, cfg)

    _print_frame(frame, args.json)
    failed = int((~frame["passed"].astype(bool)).sum())
    if failed:
        logger.error(f"{args.check}: {failed} of {len(frame)} checks failed")
        return EXIT_PRECISION
    logger.info(f"{args.check}: all {len(frame)} checks passed")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.table == "moments":
        frame = bench.moment_table()
    elif args.table == "dispersion":
        frame = bench.dispersion_probability(args.lambdas, args.n, args.reps, _require_seed(args))
    else:
        spec = _from_flags("grid options", bench.GridSpec, n_values=args.n, reps=args.reps, seed=_require_seed(args))
        frame = bench.run_grid(
            spec,
            _fit_config(args),
            oracle_points=args.oracle_points,
            workers=args.threads,
        )
        if args.json:
            frame = frame.drop(columns=["mean_time_sec"])

    if args.out:
        bench.write_table_csv(frame, args.out)
        logger.info(f"wrote {len(frame)} rows to {args.out}")
    _print_frame(frame, args.json)
    return EXIT_OK


# Parser

def _add_fit_options(parser) -> None:
    settings = get_settings()
    parser.add_argument("--nu-max", type=float, default=settings.nu_max, help="Upper bound for nu")
    parser.add_argument("--epsilon", type=float, default=settings.epsilon, help="Lower bound for nu")
    parser.add_argument("--delta", type=float, default=settings.delta, help="Distinct-value ratio threshold")


def _add_input_options(parser) -> None:
    parser.add_argument("--input", required=True, help="Dataset path, or - for stdin")
    parser.add_argument("--format", choices=[f.value for f in DatasetFormat], help="Default: freq for .csv, raw otherwise")


def build_parser() -> Parser:
    settings = get_settings()
    parser = Parser(prog="nbfit", description="Negative binomial fitting by profile maximization")
    parser.add_argument("--log-level", default=None, help="Override NBFIT_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    fit = sub.add_parser("fit", help="Fit NB, extended NB or Poisson")
    _add_input_options(fit)
    fit.add_argument("--model", choices=["nb", "enb", "poisson"], default="nb")
    _add_fit_options(fit)
    fit.add_argument("--json", action="store_true", help="Emit the result document as JSON")
    fit.set_defaults(handler=cmd_fit)

    gof = sub.add_parser("gof", help="Parametric-bootstrap KS test")
    _add_input_options(gof)
    gof.add_argument("--model", choices=["nb", "enb"], default="nb")
    gof.add_argument("--boot", type=int, default=settings.boot_reps, help="Bootstrap replicates")
    gof.add_argument("--level", type=float, default=settings.level)
    gof.add_argument("--seed", type=int)
    gof.add_argument("--threads", type=int, default=settings.workers, help="Worker processes")
    _add_fit_options(gof)
    gof.add_argument("--json", action="store_true")
    gof.set_defaults(handler=cmd_gof)

    sim = sub.add_parser("simulate", help="Draw a sample from Poisson, NB or extended NB")
    sim.add_argument("--dist", choices=["pois", "nb", "enb"], required=True)
    sim.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sim.add_argument("--nu", type=float, default=1.0)
    sim.add_argument("--p", type=float, default=0.5)
    sim.add_argument("--mu", type=float, default=1.0)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--json", action="store_true")
    sim.set_defaults(handler=cmd_simulate)

    verify = sub.add_parser("verify", help="Numeric checks of the limit theory")
    verify.add_argument("--check", choices=["g-limits", "G-positivity", "diff-profile", "ks-collapse"], required=True)
    verify.add_argument("--lambdas", type=float, nargs="+", default=list(theory_checks.DEFAULT_LAMBDAS))
    verify.add_argument("--nu-lo", type=float, default=1e-2)
    verify.add_argument("--nu-hi", type=float, default=1e6)
    verify.add_argument("--nu-points", type=int, default=40)
    verify.add_argument("--samples", type=int, default=50, help="Random samples for g-limits")
    verify.add_argument("--n-grid", type=int, nargs="+", default=[50, 500, 2000], help="Sample sizes for ks-collapse")
    verify.add_argument("--reps", type=int, default=30)
    verify.add_argument("--boot", type=int, default=100)
    verify.add_argument("--seed", type=int)
    verify.add_argument("--threads", type=int, default=settings.workers)
    verify.add_argument("--json", action="store_true")
    verify.set_defaults(handler=cmd_verify)

    bench_cmd = sub.add_parser("bench", help="Simulation tables")
    bench_cmd.add_argument("--table", choices=["grid", "dispersion", "moments"], default="grid")
    bench_cmd.add_argument("--grid", choices=["default25"], default="default25")
    bench_cmd.add_argument("--n", type=int, nargs="+", default=[100])
    bench_cmd.add_argument("--reps", type=int, default=20)
    bench_cmd.add_argument("--lambdas", type=float, nargs="+", default=[1.0, 10.0])
    bench_cmd.add_argument("--oracle-points", type=int, default=1000)
    bench_cmd.add_argument("--seed", type=int)
    bench_cmd.add_argument("--threads", type=int, default=settings.workers)
    bench_cmd.add_argument("--out", help="Also write the table as CSV")
    _add_fit_options(bench_cmd)
    bench_cmd.add_argument("--json", action="store_true")
    bench_cmd.set_defaults(handler=cmd_bench)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    settings = get_settings()
    configure_logging(settings)

    try:
        args = build_parser().parse_args(argv)
        if args.log_level:
            logging.getLogger().setLevel(args.log_level.upper())
        return args.handler(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except (SampleError, ConversionError, ValidationError, OSError) as e:
        logger.error(f"data error: {e}")
        return EXIT_DATA
    except (PrecisionError, StructuralError) as e:
        logger.error(f"precision error: {e}")
        return EXIT_PRECISION
    except ValueError as e:
        logger.error(f"invalid input: {e}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
