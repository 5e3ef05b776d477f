"""Command-line entry point: ``sobol-rank <subcommand>``.

Exit codes: 0 on success, 1 on usage or config errors, 2 on data/model errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from sobol_rank.estimators import (
    DegenerateOutputError,
    InvalidSampleError,
    LagRangeError,
    adaptive_k,
    default_k,
    eta_lags,
    order_by_input,
    sobol_from_sample,
)
from sobol_rank.io import ConfigError, DataError, format_number, read_config, read_xy_csv, write_csv
from sobol_rank.models import (
    PHI_CATALOG,
    V_CATALOG,
    ModelSpecError,
    QuadratureAccuracyError,
    asymptotic_cov,
    make_model,
    theory_summary,
)
from sobol_rank.study import StudyError, empirical_lag_cov, mse_curve, run_study

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

BOX_COLUMNS = ["q05", "q25", "median", "q75", "q95", "mean", "bias", "var", "mse"]
THEORY_FIELDS = [
    "eta", "var_y", "sobol", "e_phi2_v", "e_v2", "var_phi2",
    "sigma2_opt", "sigma2_rank", "sigma2_nn", "sigma2_ker", "improvement",
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _catalog() -> str:
    return f"phi in {{{', '.join(PHI_CATALOG)}}}, v in {{{', '.join(V_CATALOG)}}}"


def cmd_estimate(args) -> int:
    sample = read_xy_csv(args.input_csv)
    n = sample.n
    if args.k in ("auto", "adaptive"):
        k = default_k(n) if args.k == "auto" else adaptive_k(order_by_input(sample))
    else:
        try:
            k = int(args.k)
        except ValueError:
            raise UsageError(f"--k must be an integer, 'auto' or 'adaptive', got {args.k!r}")
        if not 1 <= k < n:
            raise UsageError(f"--k={k} must lie in [1, {n - 1}] for n={n}")
    est = sobol_from_sample(sample, k)
    for name, value in [
        ("n", est.n), ("k", est.k), ("eta_hat", est.eta_hat), ("mean_hat", est.mean_hat),
        ("var_hat", est.var_hat), ("s_hat", est.s_hat), ("s_hat_clamped", est.s_clamped),
    ]:
        print(f"{name:<14} {format_number(value)}")
    if args.all_lags:
        values = eta_lags(order_by_input(sample), k).values
        rows = [(lag, v) for lag, v in enumerate(values, start=1)]
        if args.out:
            write_csv(args.out, ["lag", "eta_lag"], rows)
        else:
            write_csv(sys.stdout, ["lag", "eta_lag"], rows)
    return EXIT_OK


def _model(name: str, law: str):
    try:
        return make_model(name, law)
    except ModelSpecError as exc:
        raise UsageError(f"{exc}\ncatalog: {_catalog()}; laws: uniform(a,b), exponential(rate)")


def cmd_theory(args) -> int:
    summary = theory_summary(_model(args.model, args.law), args.points)
    values = summary.as_dict()
    print(f"model {args.model}, law {args.law}")
    for name in THEORY_FIELDS:
        print(f"  {name:<12} {values[name]:>14.6g}")
    if args.out:
        write_csv(args.out, ["quantity", "value"], [(f, f"{values[f]:.6g}") for f in THEORY_FIELDS])
    return EXIT_OK


def _stats_rows(stats):
    for s in stats:
        b = s.box
        yield (s.n, s.index, b.q05, b.q25, b.median, b.q75, b.q95, b.mean, s.bias, s.variance, s.mse)


def cmd_study(args) -> int:
    config = read_config(args.config)
    report = run_study(config, threads=args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "lags.csv", ["n", "lag", *BOX_COLUMNS], _stats_rows(report.lags))
    write_csv(out / "avgs.csv", ["n", "k", *BOX_COLUMNS], _stats_rows(report.avgs))
    for n, cov in report.covariances.items():
        k = cov.shape[0]
        write_csv(
            out / f"cov_n{n}.csv",
            ["lag", *(str(m) for m in range(1, k + 1))],
            [(lag, *cov[lag - 1]) for lag in range(1, k + 1)],
        )
    theory = report.theory.as_dict()
    write_csv(out / "theory.csv", ["quantity", "value"], [(f, theory[f]) for f in THEORY_FIELDS])
    print(f"wrote {len(report.lags)} lag rows, {len(report.avgs)} average rows to {out}")
    return EXIT_OK


def cmd_mse_curve(args) -> int:
    config = read_config(args.config)
    rows = mse_curve(config, threads=args.threads)
    header = ["n", "estimator", "k", "n_mse", "n_bias2", "n_var", "reference", "sigma2_rank"]
    table = [
        (r.n, r.estimator, r.k, r.n_mse, r.n_bias2, r.n_var, r.reference, r.sigma2_rank)
        for r in rows
    ]
    write_csv(args.out if args.out else sys.stdout, header, table)
    return EXIT_OK


def cmd_cov_check(args) -> int:
    config = read_config(args.config)
    n = args.n if args.n is not None else max(config.sample_sizes)
    k = args.k
    if n not in config.sample_sizes:
        raise UsageError(f"--n={n} is not one of the config sample sizes {config.sample_sizes}")
    if not 1 <= k <= config.max_lag:
        raise UsageError(f"--k={k} must lie in [1, max_lag={config.max_lag}]")
    cov, se = empirical_lag_cov(config, n, k, threads=args.threads, return_se=True)
    theory = asymptotic_cov(theory_summary(config.model), k)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (cov - theory) / se, np.nan)
    rows = [
        (lag, m, cov[lag - 1, m - 1], theory[lag - 1, m - 1], se[lag - 1, m - 1], z[lag - 1, m - 1])
        for lag in range(1, k + 1)
        for m in range(1, k + 1)
    ]
    write_csv(args.out if args.out else sys.stdout, ["lag", "lag2", "n_cov", "theory", "se", "z"], rows)
    worst = float(np.nanmax(np.abs(z))) if np.isfinite(z).any() else float("nan")
    verdict = "within" if worst <= args.sigmas else "outside"
    print(f"max |z| = {worst:.3f} ({verdict} {args.sigmas:g} standard errors)", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sobol-rank", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("estimate", help="estimate a Sobol index from an x,y CSV")
    e.add_argument("input_csv")
    e.add_argument("--k", default="auto", help="lag count, 'auto' (cube root) or 'adaptive'")
    e.add_argument("--all-lags", action="store_true", help="also emit every lag estimate")
    e.add_argument("--out", help="CSV path for --all-lags (default stdout)")
    e.set_defaults(func=cmd_estimate)

    t = sub.add_parser("theory", help="theoretical variance constants of a catalog model")
    t.add_argument("--model", required=True, help="'<phi>/<v>', e.g. sin5/vquad")
    t.add_argument("--law", default="uniform(0,1)")
    t.add_argument("--points", type=int, default=32, help="Gauss points per panel")
    t.add_argument("--out", help="also write a CSV here")
    t.set_defaults(func=cmd_theory)

    for name, func, helptext in [
        ("study", cmd_study, "full Monte Carlo study, one CSV per table"),
        ("mse-curve", cmd_mse_curve, "scaled MSE of lag-1, lag-k and averaged estimators"),
        ("cov-check", cmd_cov_check, "empirical vs asymptotic covariance of lag estimators"),
    ]:
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True)
        s.add_argument("--threads", type=int, default=None)
        s.set_defaults(func=func)
        if name == "study":
            s.add_argument("--out-dir", required=True)
        else:
            s.add_argument("--out")
        if name == "cov-check":
            s.add_argument("--n", type=int)
            s.add_argument("--k", type=int, default=5)
            s.add_argument("--sigmas", type=float, default=4.0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"sobol-rank: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        DataError,
        InvalidSampleError,
        DegenerateOutputError,
        LagRangeError,
        ModelSpecError,
        QuadratureAccuracyError,
        StudyError,
    ) as exc:
        print(f"sobol-rank: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
