"""Command-line front end: ``sweep``, ``figure`` and ``validate``.

Exit codes: 0 success, 2 usage or bad config, 3 validation failure,
4 numeric failure at one or more sweep points.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from . import analytic
from .model import CONFIG_ENV_VAR, InvalidParameter, load_config
from .simulator import PostMode
from .sweep import AXES, ENGINES, FIGURES, SweepPlan, UsageError, figure_plan, run_sweep, stderr_progress
from .validation import run_validate

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3, 4


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _values(text: str, axis: str) -> tuple:
    try:
        if axis == "n_nodes":
            return tuple(int(v) for v in _csv_list(text))
        return tuple(float(v) for v in _csv_list(text))
    except ValueError:
        raise UsageError(f"--values must be a comma-separated list of numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"scenario file (default: ${CONFIG_ENV_VAR}, else the bundled default scenario)")
    p.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    p.add_argument("--iterations", type=int, default=10_000, help="simulation realizations per point")
    p.add_argument("--engine", help=f"comma-separated subset of {','.join(ENGINES)}")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--post-mode", choices=[m.value for m in PostMode], default=PostMode.REASSOCIATE.value)
    p.add_argument("--counts", choices=[c.value for c in analytic.Counts], default=analytic.Counts.FLOORED.value)
    p.add_argument("--mc-samples", type=int, default=4000, help="position samples per CH count (analytic-exact)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-stratify", action="store_true", help="draw K i.i.d. instead of stratified")
    p.add_argument("--quiet", action="store_true", help="suppress the progress counter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtcrobust", description="Temporal robustness of clustered mMTC networks")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="sweep one parameter and write CSV")
    sw.add_argument("--axis", required=True, choices=AXES)
    sw.add_argument("--values", required=True, help="comma-separated axis values, increasing")
    _common(sw)

    fig = sub.add_parser("figure", help="reproduce the data behind one figure")
    fig.add_argument("name", choices=sorted(FIGURES))
    fig.add_argument("--axis", choices=AXES, help="override the figure's axis")
    fig.add_argument("--values", help="override the figure's axis values")
    _common(fig)

    val = sub.add_parser("validate", help="run the self-check suite")
    val.add_argument("--level", choices=("fast", "full"), default="fast")
    return parser


def _plan_kwargs(args) -> dict:
    kwargs = dict(
        iterations=args.iterations,
        master_seed=args.seed,
        post_mode=PostMode(args.post_mode),
        counts=analytic.Counts(args.counts),
        analytic_settings=analytic.AnalyticSettings(mc_samples=args.mc_samples, seed=args.seed),
        workers=args.workers,
        stratify=not args.no_stratify,
    )
    if args.engine:
        kwargs["engines"] = tuple(_csv_list(args.engine))
    return kwargs


def _write(result, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            result.write_csv(fh)
    else:
        result.write_csv(sys.stdout)


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        report = run_validate(args.level, log=print)
        print(report.lines()[-1])
        return EXIT_OK if report.passed else EXIT_VALIDATION

    try:
        base = load_config(args.config)
        kwargs = _plan_kwargs(args)
        if args.command == "sweep":
            plan = SweepPlan(axis=args.axis, values=_values(args.values, args.axis), base=base,
                             engines=kwargs.pop("engines", ("sim", "analytic-approx")), **kwargs)
        else:
            axis = args.axis or FIGURES[args.name]["axis"]
            if args.values:
                kwargs["values"] = _values(args.values, axis)
            plan = figure_plan(args.name, base, axis=args.axis, **kwargs)
    except (UsageError, InvalidParameter, OSError) as exc:
        print(f"mtcrobust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    result = run_sweep(plan, progress=None if args.quiet else stderr_progress)
    _write(result, args.out)
    return EXIT_NUMERIC if result.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
