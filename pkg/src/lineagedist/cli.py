"""``lineagedist`` command line.

Every subcommand writes CSV (comma separated, LF line endings).  Exit
status is 0 on success, 2 on bad arguments and 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import __version__
from .birthdeath import ModelParams
from .distributions import (
    EXACT_SERIES_CONTROL,
    MethodKind,
    QuadratureConfig,
    q_finite_tau,
    q_integral_exact,
    q_series_exact,
    second_order_coefficients,
    q_asymptotic,
)
from .errors import DomainError, LineageDistError
from .inference import ObservedCounts, fit_mle, read_sizes_csv
from .simulate import SimulationConfig, lumped_tvd, sample_lineage_size
from .special import SeriesControl
from .tables import FIGURES, figure_grid, figure_rows, table1_cells, table2_cells
from .tails import CdfRequest, QuantileRequest, cdf, quantile

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

# share of failed table cells above which the run counts as failed
MAX_FAILED_CELL_SHARE = 0.10

ALL_METHODS = (MethodKind.EXACT_SERIES, MethodKind.SECOND_ORDER, MethodKind.ASYMPTOTIC)


class UsageError(Exception):
    pass


def fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, int):
        return str(v)
    return f"{v:.12g}"


def parse_n_spec(spec: str):
    """``"1..10"``, ``"10,50,100"`` or a mix such as ``"1..5,10"``."""
    out = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                a, b = part.split("..", 1)
                a, b = int(a), int(b)
                if b < a:
                    raise UsageError(f"--n: empty range {part!r}")
                out.extend(range(a, b + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"--n: cannot parse {part!r}") from None
    if not out:
        raise UsageError("--n: grid is empty")
    if min(out) < 1:
        raise UsageError("--n: values must be >= 1")
    return sorted(set(out))


def parse_p_spec(spec: str):
    try:
        ps = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--p: cannot parse {spec!r}") from None
    if not ps:
        raise UsageError("--p: list is empty")
    for p in ps:
        if not 0 < p < 1:
            raise UsageError(f"--p: {p} is not in (0, 1)")
    return ps


def model_from_args(args) -> ModelParams:
    rates = (args.lam, args.mu, args.rho)
    ratios = (args.r, args.theta)
    have_rates = any(v is not None for v in rates)
    have_ratios = any(v is not None for v in ratios)
    if have_rates and have_ratios:
        raise UsageError("give either --lambda/--mu/--rho or --r/--theta, not both")
    if have_rates:
        if any(v is None for v in rates):
            raise UsageError("--lambda, --mu and --rho must be given together")
        try:
            return ModelParams(*rates)
        except DomainError as exc:
            raise UsageError(f"--lambda/--mu/--rho: {exc}") from None
    if have_ratios:
        if any(v is None for v in ratios):
            raise UsageError("--r and --theta must be given together")
        try:
            return ModelParams.from_ratios(args.r, args.theta)
        except DomainError as exc:
            raise UsageError(f"--r/--theta: {exc}") from None
    raise UsageError("model parameters missing: give --lambda/--mu/--rho or --r/--theta")


def methods_from_args(args):
    if args.method == "all":
        return list(ALL_METHODS)
    try:
        return [MethodKind.parse(args.method)]
    except DomainError as exc:
        raise UsageError(f"--method: {exc}") from None


def controls_from_args(args):
    if args.rel_tol is None:
        return EXACT_SERIES_CONTROL, QuadratureConfig()
    if not args.rel_tol > 0:
        raise UsageError("--rel-tol must be positive")
    return SeriesControl(rel_tol=args.rel_tol), QuadratureConfig(rel_tol=args.rel_tol)


class Output:
    """CSV sink on a file or standard output."""

    def __init__(self, path):
        self.path = path
        self._fh = None

    def __enter__(self):
        if self.path in (None, "-"):
            self._fh = sys.stdout
        else:
            self._fh = open(self.path, "w", newline="")
        self.writer = csv.writer(self._fh, lineterminator="\n")
        return self

    def row(self, *cells):
        self.writer.writerow(cells)

    def __exit__(self, *exc):
        if self._fh is not sys.stdout:
            self._fh.close()
        else:
            self._fh.flush()
        return False


# ---------------------------------------------------------------------------
# subcommands


def cmd_pmf(args):
    params = model_from_args(args)
    methods = methods_from_args(args)
    grid = parse_n_spec(args.n)
    ctrl, quad = controls_from_args(args)
    if args.tau is not None:
        if not args.tau > 0:
            raise UsageError("--tau must be positive")
        if any(not m.is_exact for m in methods):
            raise UsageError("--tau is only defined for exact methods")
    # evaluate everything first so a failure leaves no partial output
    body = []
    coef = None
    for n in grid:
        for m in methods:
            if args.tau is not None:
                v = q_finite_tau(params, n, args.tau, quad)
            elif m is MethodKind.EXACT_SERIES:
                v = q_series_exact(params, n, ctrl)
            elif m is MethodKind.EXACT_QUADRATURE:
                v = q_integral_exact(params, n, quad)
            elif m is MethodKind.SECOND_ORDER:
                coef = coef or second_order_coefficients(params, ctrl)
                v = coef.value(n)
            else:
                v = q_asymptotic(params, n)
            body.append((n, m.value, fmt(v)))
    with Output(args.output) as out:
        out.row("n", "method", "value")
        for row in body:
            out.row(*row)
    return EXIT_OK


def cmd_cdf(args):
    params = model_from_args(args)
    methods = methods_from_args(args)
    grid = parse_n_spec(args.n)
    _, quad = controls_from_args(args)
    cols = {m: dict(cdf(CdfRequest(params, m, tuple(grid), quad=quad))) for m in methods}
    with Output(args.output) as out:
        out.row("n", "method", "value")
        for n in grid:
            for m in methods:
                out.row(n, m.value, fmt(cols[m][n]))
    return EXIT_OK


def cmd_quantile(args):
    params = model_from_args(args)
    methods = methods_from_args(args)
    ps = parse_p_spec(args.p)
    _, quad = controls_from_args(args)
    status = EXIT_OK
    with Output(args.output) as out:
        out.row("p", "method", "n_star")
        for p in ps:
            for m in methods:
                try:
                    v = quantile(QuantileRequest(params, m, p, quad))
                except OverflowError as exc:
                    print(f"lineagedist: p={p} {m.value}: {exc}", file=sys.stderr)
                    v, status = None, EXIT_NUMERIC
                out.row(fmt(p), m.value, fmt(v))
    return status


def _table_status(cells):
    failed = [c for c in cells if c.value is None]
    for c in failed:
        print(f"lineagedist: cell r={c.r} theta={c.theta} {c.dist} {c.column}: {c.error}", file=sys.stderr)
    return EXIT_NUMERIC if len(failed) > MAX_FAILED_CELL_SHARE * len(cells) else EXIT_OK


def cmd_table1(args):
    cells = table1_cells()
    with Output(args.output) as out:
        out.row("r", "theta", "dist", "n", "value", "paper_value", "difference")
        for c in cells:
            out.row(fmt(c.r), fmt(c.theta), c.dist, c.column, fmt(c.value), f"{c.published:.3f}", fmt(c.difference))
    return _table_status(cells)


def cmd_table2(args):
    cells = table2_cells()
    with Output(args.output) as out:
        out.row("r", "theta", "dist", "p", "n_star", "paper_value", "difference")
        for c in cells:
            out.row(fmt(c.r), fmt(c.theta), c.dist, fmt(c.column), fmt(c.value), c.published, fmt(c.difference))
    return _table_status(cells)


def cmd_figures(args):
    outdir = Path(args.output or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    figs = list(FIGURES) if args.figure == "all" else [f.strip() for f in args.figure.split(",")]
    for f in figs:
        if f not in FIGURES:
            raise UsageError(f"--figure: unknown panel {f!r}; expected one of {', '.join(FIGURES)}")
    if args.n_max < 10:
        raise UsageError("--n-max must be >= 10")
    grid = figure_grid(args.n_max)
    for f in figs:
        path = outdir / f"figure_{f}.csv"
        with Output(str(path)) as out:
            out.row("n", "exact", "second_order", "asymptotic")
            for n, e, s, a in figure_rows(f, grid):
                out.row(n, fmt(e), fmt(s), fmt(a))
        print(path)
    return EXIT_OK


def cmd_simulate(args):
    if args.seed is None:
        raise UsageError("--seed is required (the simulator never picks its own seed)")
    params = model_from_args(args)
    if args.replicates < 1:
        raise UsageError("--replicates must be >= 1")
    try:
        cfg = SimulationConfig(
            params,
            args.replicates,
            args.seed,
            tau=args.tau,
            truncated=not args.untruncated,
            max_population=args.max_population,
        )
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    sample, sizes = sample_lineage_size(cfg, return_sizes=True)
    with Output(args.output) as out:
        out.row("n", "count")
        for n, c in zip(sample.sizes, sample.counts):
            out.row(int(n), int(c))
    if args.sizes_output:
        with open(args.sizes_output, "w") as fh:
            fh.write("".join(f"{int(n)}\n" for n in sizes))
    print(
        f"replicates={sample.n_replicates_used} capped={sample.capped_replicates} "
        f"truncation_rejections={sample.truncation_rejections}",
        file=sys.stderr,
    )
    if args.compare:
        if args.untruncated or args.tau is not None:
            raise UsageError("--compare needs a truncated run with tau unset")
        lump = args.lump_at or max(2, min(1000, args.max_population // 2))
        tvd = lumped_tvd(sample, params, lump)
        print(f"tvd={tvd:.6g} lump_at={lump}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args):
    if not args.input:
        raise UsageError("--input is required")
    try:
        with open(args.input, newline="") as fh:
            sizes = read_sizes_csv(fh)
    except OSError as exc:
        raise UsageError(f"--input: {exc}") from None
    except DomainError as exc:
        raise UsageError(f"--input: {exc}") from None
    data = ObservedCounts.from_sizes(sizes, censor_at=args.censor_at)
    res = fit_mle(data)
    text = res.to_kv() + "\n" + res.to_csv()
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    return EXIT_OK if res.converged else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _model_flags(p):
    g = p.add_argument_group("model parameters")
    g.add_argument("--lambda", dest="lam", type=float, help="birth rate")
    g.add_argument("--mu", type=float, help="death rate")
    g.add_argument("--rho", type=float, help="sublineage origination rate")
    g.add_argument("--r", type=float, help="rho/omega (signed)")
    g.add_argument("--theta", type=float, help="mu/lambda")


def _common(p, method=True):
    _model_flags(p)
    if method:
        p.add_argument(
            "--method",
            default="exact",
            choices=[m.value for m in MethodKind] + ["all"],
            help="evaluation route ('all' = exact, second-order, asymptotic)",
        )
    p.add_argument("--rel-tol", type=float, help="override series and quadrature relative tolerance")
    p.add_argument("--output", help="output file (default: standard output)")


def build_parser():
    parser = _Parser(prog="lineagedist", description="Lineage-size distributions of birth-death clades.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pmf", help="point probabilities")
    _common(p)
    p.add_argument("--n", required=True, help="sizes, e.g. 1..10 or 10,50,100")
    p.add_argument("--tau", type=float, help="finite clade age (exact methods only)")
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("cdf", help="cumulative probabilities (self-normalised)")
    _common(p)
    p.add_argument("--n", required=True, help="sizes, e.g. 1..10 or 10,50,100")
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("quantile", help="upper percentiles n*")
    _common(p)
    p.add_argument("--p", required=True, help="upper-tail probabilities, e.g. 0.05,0.01")
    p.set_defaults(func=cmd_quantile)

    p = sub.add_parser("table1", help="CDF table beside the published values")
    p.add_argument("--output")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("table2", help="percentile table beside the published values")
    p.add_argument("--output")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("figures", help="CDF curves per figure panel, one CSV each")
    p.add_argument("--output", help="output directory (default: current)")
    p.add_argument("--figure", default="all", help="panels, e.g. 1a,2c (default: all)")
    p.add_argument("--n-max", type=int, default=10**6)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("simulate", help="Monte Carlo size histogram")
    _model_flags(p)
    p.add_argument("--replicates", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=float, help="finite clade age")
    p.add_argument("--max-population", type=int, default=10**8)
    p.add_argument("--untruncated", action="store_true", help="keep extinct lineages (size 0)")
    p.add_argument("--compare", action="store_true", help="print TVD against the exact law")
    p.add_argument("--lump-at", type=int, help="first size pooled into the TVD tail bin")
    p.add_argument("--sizes-output", help="also write one size per line here")
    p.add_argument("--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum-likelihood (r, theta)")
    p.add_argument("--input", help="CSV of sizes (one per line, or name,count)")
    p.add_argument("--censor-at", type=int, help="treat sizes >= this as right-censored")
    p.add_argument("--output")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lineagedist {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"lineagedist {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LineageDistError, ArithmeticError) as exc:
        print(f"lineagedist {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
