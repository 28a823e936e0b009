"""Command-line front end: simulate, fit, test, compare and reproduce tables.

Subcommands
-----------
simulate          draw a DAR(1) series (optionally with missing values) to CSV
fit-dar           estimate (pi, alpha, beta) and run the three independence tests
test              run the independence tests only
fit-glm           fit lagged regressions per family and rank lags by AIC
reproduce-tables  run the full simulation study grid and emit its four tables

Data goes to files or standard output; diagnostics go to standard error.
Every command is deterministic given its flags and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import montecarlo
from .core import CatSeries, DarcatError, StateSpace, parse_series, serialize_series
from .dar import DarModel, MissingDarModel, simulate, simulate_with_missing
from .estimate import (
    estimate_alpha_ls,
    estimate_alpha_mle,
    estimate_alpha_mle_gapped,
    estimate_beta,
    estimate_pi,
)
from .glm import aic_table
from .independence import TestReport, chi_square_test, longest_run_test, runs_count_test

__all__ = ["main"]


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read_states(path: str) -> StateSpace:
    """States file: one label per line, file order = ordinal order."""
    labels = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    return StateSpace(tuple(labels), ordinal=True)


def _load_series(paths: list[str], space: StateSpace) -> CatSeries:
    """Parse one or more CSV files; several files are concatenated in order."""
    obs: list[int] = []
    times: list[str] = []
    for p in paths:
        s = parse_series(Path(p).read_text(encoding="utf-8"), space)
        obs.extend(s.obs)
        times.extend(s.time_labels or ())
    return CatSeries(space, tuple(obs), tuple(times) if len(times) == len(obs) else None)


def _parse_pi(text: str) -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError:
        raise DarcatError(f"--pi must be a comma list of numbers, got {text!r}") from None
    if values.size < 2 or np.any(values <= 0):
        raise DarcatError("--pi needs at least two positive components")
    if abs(values.sum() - 1.0) > 1e-3:
        raise DarcatError(f"--pi must sum to 1, got {values.sum()}")
    return values / values.sum()


def _apply_policy(series: CatSeries, policy: str) -> tuple[CatSeries, str]:
    if not series.has_missing:
        return series, "series complete, no missing-value policy needed"
    if policy == "drop":
        return series.drop_missing(), "policy drop: missing values removed, gaps closed"
    kept = series.longest_complete_segment()
    return kept, f"policy longest-segment: testing the longest complete run ({len(kept)} positions)"


def _restrict_to_observed(series: CatSeries) -> tuple[CatSeries, str | None]:
    """Re-express the series on the categories actually observed.

    Tests need strictly positive state probabilities, so categories that
    never occur are projected out (as when a field protocol's top class is
    never recorded).
    """
    values = sorted(set(v for v in series.obs if v > 0))
    if len(values) < 2:
        raise DarcatError("only one category observed; independence tests are undefined")
    if len(values) == series.space.k:
        return series, None
    labels = tuple(series.space.label_of(v) for v in values)
    remap = {v: i + 1 for i, v in enumerate(values)}
    sub = StateSpace(labels, ordinal=series.space.ordinal)
    obs = tuple(remap.get(v, -1) for v in series.obs)
    gone = [series.space.label_of(v) for v in range(1, series.space.k + 1) if v not in values]
    return CatSeries(sub, obs, series.time_labels), f"unobserved categories {gone} projected out for testing"


def _fmt_report(rep: TestReport | None, reason: str | None = None) -> str:
    if rep is None:
        return f"NA ({reason})"
    parts = [f"stat={rep.statistic:.4f}"]
    if rep.p_value is not None:
        parts.append(f"p={rep.p_value:.4f}")
    if "band_lower" in rep.extras:
        parts.append(f"band=[{rep.extras['band_lower']:.3f}, {rep.extras['band_upper']:.3f}]")
    parts.append("reject" if rep.reject else "accept")
    if rep.power is not None:
        parts.append(f"power={rep.power:.3f}")
    return " ".join(parts)


def _run_tests(series: CatSeries, level: float, alpha1: float | None):
    """The three tests with per-test degradation to NA."""
    out: dict[str, tuple[TestReport | None, str | None]] = {}
    for name, runner in (
        ("chi_square", lambda: chi_square_test(series, level=level)),
        ("runs_count", lambda: runs_count_test(series, level=level)),
        (
            "longest_run",
            lambda: longest_run_test(
                series,
                level=level,
                alpha1=alpha1 if alpha1 is not None and 0.0 <= alpha1 < 1.0 else None,
            ),
        ),
    ):
        try:
            out[name] = (runner(), None)
        except DarcatError as exc:
            out[name] = (None, str(exc))
    return out


def cmd_simulate(args: argparse.Namespace) -> int:
    pi = _parse_pi(args.pi)
    space = _read_states(args.states) if args.states else StateSpace.from_k(pi.size)
    model = DarModel(alpha=args.alpha, pi=pi, space=space)
    if args.beta is not None:
        series = simulate_with_missing(MissingDarModel(model, args.beta), args.n, args.seed)
    else:
        series = simulate(model, args.n, args.seed)
    text = serialize_series(series)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    beta_txt = f" beta={args.beta}" if args.beta is not None else ""
    _err(
        f"simulated {len(series)} observations (n={args.n}) from alpha={args.alpha} "
        f"pi=({','.join(f'{v:g}' for v in pi)}){beta_txt} seed={args.seed}; "
        f"{series.n_missing} missing"
    )
    return 0


def _fit_dar_csv(pi_hat, a1, a2, beta, obs_frac, tests) -> str:
    def cell(rep_err, attr):
        rep, _ = rep_err
        if rep is None:
            return "NA"
        val = getattr(rep, attr)
        if val is None:
            return "NA"
        return f"{val:.6f}" if isinstance(val, float) else str(int(val))

    header = (
        "pi_hat,alpha1,alpha1_converged,alpha2,alpha2_converged,beta_missing,observed_fraction,"
        "chi2_stat,chi2_p,chi2_reject,runs_stat,runs_p,runs_reject,"
        "longest_stat,longest_reject,longest_power"
    )
    row = ",".join(
        [
            "(" + ";".join(f"{v:.3f}" for v in pi_hat) + ")",
            f"{a1.alpha_hat:.6f}",
            str(int(a1.converged)),
            f"{a2.alpha_hat:.6f}" if a2 is not None else "NA",
            str(int(a2.converged)) if a2 is not None else "NA",
            f"{beta:.6f}",
            f"{obs_frac:.6f}",
            cell(tests["chi_square"], "statistic"),
            cell(tests["chi_square"], "p_value"),
            cell(tests["chi_square"], "reject"),
            cell(tests["runs_count"], "statistic"),
            cell(tests["runs_count"], "p_value"),
            cell(tests["runs_count"], "reject"),
            cell(tests["longest_run"], "statistic"),
            cell(tests["longest_run"], "reject"),
            cell(tests["longest_run"], "power"),
        ]
    )
    return header + "\n" + row + "\n"


def cmd_fit_dar(args: argparse.Namespace) -> int:
    space = _read_states(args.states)
    series = _load_series(args.input, space)
    pi_est = estimate_pi(series)
    beta = estimate_beta(series)
    if series.has_missing:
        a1 = estimate_alpha_mle_gapped(series)
        a1_label = "alpha1 (MLE, gap-aware)"
    else:
        a1 = estimate_alpha_mle(series, pi_est.pi_hat)
        a1_label = "alpha1 (MLE)"
    try:
        policy_series, policy_note = _apply_policy(series, args.missing_policy)
        test_series, restrict_note = _restrict_to_observed(policy_series)
    except DarcatError as exc:
        test_series, restrict_note = None, None
        policy_note = f"policy {args.missing_policy}: unusable ({exc})"
    if test_series is not None:
        try:
            a2 = estimate_alpha_ls(test_series, estimate_pi(test_series).pi_hat)
        except DarcatError as exc:
            a2, a2_err = None, str(exc)
        else:
            a2_err = None
        tests = _run_tests(test_series, args.level, a1.alpha_hat)
    else:
        a2, a2_err = None, "no usable test series"
        tests = {name: (None, "no usable test series") for name in ("chi_square", "runs_count", "longest_run")}

    if args.format == "csv":
        sys.stdout.write(_fit_dar_csv(pi_est.pi_hat, a1, a2, beta, 1.0 - beta, tests))
    else:
        lines = [
            f"series: {', '.join(args.input)}",
            f"  {len(series)} positions, k={space.k} categories, {series.n_missing} missing",
            f"  {policy_note}",
        ]
        if restrict_note:
            lines.append(f"  {restrict_note}")
        lines += [
            "estimates (full series):",
            "  pi_hat: (" + ";".join(f"{v:.3f}" for v in pi_est.pi_hat) + f")  [n_obs={pi_est.n_obs}]",
            f"  {a1_label}: {a1.alpha_hat:.4f}" + ("" if a1.converged else "  [not admissible]"),
        ]
        if a2 is not None:
            lines.append(
                f"  alpha2 (least squares, on policy series): {a2.alpha_hat:.4f}"
                + ("" if a2.converged else "  [outside [0,1)]")
            )
        else:
            lines.append(f"  alpha2 (least squares): NA ({a2_err})")
        lines.append(f"  beta_hat (missing probability): {beta:.4f}   observed fraction: {1 - beta:.4f}")
        lines.append(f"independence tests at level {args.level} (on policy series):")
        for name in ("chi_square", "runs_count", "longest_run"):
            rep, reason = tests[name]
            lines.append(f"  {name}: {_fmt_report(rep, reason)}")
            if rep is not None and rep.notes:
                lines.extend(f"    note: {note}" for note in rep.notes)
        sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        Path(args.out).write_text(
            _fit_dar_csv(pi_est.pi_hat, a1, a2, beta, 1.0 - beta, tests), encoding="utf-8"
        )
    return 0


def cmd_test(args: argparse.Namespace) -> int:
    space = _read_states(args.states)
    series = _load_series(args.input, space)
    policy_series, policy_note = _apply_policy(series, args.missing_policy)
    test_series, restrict_note = _restrict_to_observed(policy_series)
    _err(policy_note)
    if restrict_note:
        _err(restrict_note)
    tests = _run_tests(test_series, args.level, None)
    lines = [f"independence tests at level {args.level}:"]
    for name in ("chi_square", "runs_count", "longest_run"):
        rep, reason = tests[name]
        lines.append(f"  {name}: {_fmt_report(rep, reason)}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_fit_glm(args: argparse.Namespace) -> int:
    space = _read_states(args.states)
    series = _load_series(args.input, space)
    lags = tuple(sorted({int(v) for v in args.lags.split(",")}))
    families = ["categorical", "ordinal"] if args.family == "both" else [args.family]
    chunks = []
    for family in families:
        table = aic_table(series, family, lags=lags, common_rows=args.common_rows)
        if args.format == "csv":
            chunks.append(f"# family: {family}\n" + table.to_csv())
        elif args.format == "md":
            chunks.append(table.to_markdown())
        else:
            chunks.append(table.to_text())
    out_text = "\n".join(chunks)
    sys.stdout.write(out_text)
    if args.out:
        Path(args.out).write_text(out_text, encoding="utf-8")
    return 0


def cmd_reproduce_tables(args: argparse.Namespace) -> int:
    if args.markdown:
        args.format = "md"
    grid = montecarlo.study_grid(m=args.m, seed=args.seed)
    results = montecarlo.run_grid(grid)
    grouped = montecarlo.results_by_pi(results)
    formats = {
        "csv": (montecarlo.format_cells_csv, "csv"),
        "md": (montecarlo.format_cells_markdown, "md"),
        "txt": (montecarlo.format_cells_text, "txt"),
    }
    fmt, ext = formats[args.format]
    outdir = Path(args.out) if args.out else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    for i, (pi, cells) in enumerate(grouped.items(), start=1):
        title = "pi=(" + ";".join(f"{v:g}" for v in pi) + f"), m={grid.m}"
        body = fmt(cells)
        if outdir:
            path = outdir / f"table{i}.{ext}"
            path.write_text(body, encoding="utf-8")
            _err(f"wrote {path} ({title})")
        else:
            sys.stdout.write(f"# {title}\n{body}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="darcat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--states", help="states file: one label per line, file order = ordinal order")
    common.add_argument("--level", type=float, default=0.05, help="test level (default 0.05)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", help="output file (or directory for reproduce-tables)")
    common.add_argument(
        "--missing-policy",
        choices=("drop", "longest-segment"),
        default="longest-segment",
        help="how tests handle missing values (default longest-segment)",
    )
    common.add_argument("--format", choices=("csv", "md", "txt"), default="txt")

    p = sub.add_parser("simulate", parents=[common], help="simulate a DAR(1) series to CSV")
    p.add_argument("--alpha", type=float, required=True, help="persistence in [0,1)")
    p.add_argument("--pi", required=True, help="comma list of state probabilities")
    p.add_argument("--n", type=int, required=True, help="number of steps (writes n+1 rows)")
    p.add_argument("--beta", type=float, default=None, help="missing-value probability")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-dar", parents=[common], help="fit the DAR(1) model and run the tests")
    p.add_argument("input", nargs="+", help="series CSV file(s); several files are concatenated")
    p.set_defaults(func=cmd_fit_dar)

    p = sub.add_parser("test", parents=[common], help="run the three independence tests")
    p.add_argument("input", nargs="+")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("fit-glm", parents=[common], help="lagged regression with AIC comparison")
    p.add_argument("input", nargs="+")
    p.add_argument("--family", choices=("categorical", "ordinal", "both"), default="both")
    p.add_argument("--lags", default="0,1,2", help="comma list from {0,1,2} (default 0,1,2)")
    p.add_argument(
        "--common-rows",
        action="store_true",
        help="restrict every lag to the rows usable at the largest lag",
    )
    p.set_defaults(func=cmd_fit_glm)

    p = sub.add_parser("reproduce-tables", parents=[common], help="run the simulation study grid")
    p.add_argument("--m", type=int, default=100, help="replicates per cell (default 100)")
    p.add_argument("--markdown", action="store_true", help="shorthand for --format md")
    p.set_defaults(func=cmd_reproduce_tables, seed=montecarlo.DEFAULT_SEED)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) in ("fit-dar", "test", "fit-glm") and not args.states:
        _err("error: --states is required for this command")
        return 2
    try:
        return args.func(args)
    except DarcatError as exc:
        _err(f"error: {exc}")
        return 2
    except FileNotFoundError as exc:
        _err(f"error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
