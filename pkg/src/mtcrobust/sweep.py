"""Parameter sweeps and figure-data reproduction with CSV output."""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

from . import analytic
from .model import (
    BernoulliPerNode,
    DegenerateDegree,
    InvalidParameter,
    NetworkConfig,
    NoSuccessBaseline,
    RobustnessEstimate,
    UniformCount,
)
from .simulator import (
    PostMode,
    breakdown_from_record,
    degree_ratio_from_record,
    robustness_from_record,
    simulate,
)

AXES = ("ch_probability", "n_nodes", "p_threshold_dbm", "failure_q")
ENGINES = ("sim", "analytic-exact", "analytic-approx", "mean-degree")
CSV_HEADER = (
    "axis",
    "value",
    "engine",
    "robustness",
    "std_error",
    "ci_lo",
    "ci_hi",
    "pre_success",
    "post_success",
    "pct_fail_nodes",
    "pct_fail_chs",
    "seed",
    "alpha",
    "mode",
)
PRE_POST = ("pre_success", "post_success")
PCT = ("pct_fail_nodes", "pct_fail_chs")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class SweepPlan:
    axis: str
    values: tuple
    engines: tuple[str, ...]
    base: NetworkConfig
    iterations: int = 10_000
    master_seed: int = 0
    post_mode: PostMode = PostMode.REASSOCIATE
    counts: analytic.Counts = analytic.Counts.FLOORED
    analytic_settings: Optional[analytic.AnalyticSettings] = None
    workers: int = 1
    stratify: bool = True
    # optional columns to fill; None fills everything available
    extras: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise UsageError(f"unknown axis {self.axis!r}; choose from {', '.join(AXES)}")
        if not self.values:
            raise UsageError("sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise UsageError("sweep values must be strictly increasing")
        unknown = set(self.engines) - set(ENGINES)
        if unknown or not self.engines:
            raise UsageError(f"unknown engine(s) {sorted(unknown)}; choose from {', '.join(ENGINES)}")

    def settings(self) -> analytic.AnalyticSettings:
        return self.analytic_settings or analytic.AnalyticSettings(seed=self.master_seed)


@dataclass
class SweepRow:
    axis: str
    value: float
    engine: str
    seed: int
    alpha: float
    mode: str
    robustness: Optional[float] = None
    std_error: Optional[float] = None
    ci_lo: Optional[float] = None
    ci_hi: Optional[float] = None
    pre_success: Optional[float] = None
    post_success: Optional[float] = None
    pct_fail_nodes: Optional[float] = None
    pct_fail_chs: Optional[float] = None
    error: Optional[str] = None

    def set_estimate(self, est: RobustnessEstimate) -> None:
        self.robustness = est.mean
        self.std_error = est.std_error
        self.ci_lo, self.ci_hi = est.ci95


@dataclass
class SweepResult:
    plan: SweepPlan
    rows: list[SweepRow] = field(default_factory=list)

    def series(self, engine: str, column: str = "robustness") -> list[Optional[float]]:
        return [getattr(r, column) for r in self.rows if r.engine == engine]

    def write_csv(self, out: TextIO) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([_cell(getattr(row, name)) for name in CSV_HEADER])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    @property
    def failed(self) -> bool:
        return any(r.error for r in self.rows)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.9g}"
    return str(value)


def point_config(base: NetworkConfig, axis: str, value) -> NetworkConfig:
    if axis == "n_nodes":
        return base.with_nodes(int(value))
    if axis == "ch_probability":
        return base.with_(ch_probability=float(value))
    if axis == "p_threshold_dbm":
        return base.with_(p_threshold_dbm=float(value))
    return base


def _mode_tag(pairs: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in pairs.items())


def _scenario(config: NetworkConfig) -> dict:
    return {"n": config.n_nodes, "p": f"{config.ch_probability:g}", "pth": f"{config.p_threshold_dbm:g}"}


def _evaluate_point(plan: SweepPlan, value) -> list[SweepRow]:
    config = point_config(plan.base, plan.axis, value)
    policy = BernoulliPerNode(float(value)) if plan.axis == "failure_q" else UniformCount()
    alpha = config.path_loss_exponent
    extras = set(CSV_HEADER) if plan.extras is None else set(plan.extras)
    rows: list[SweepRow] = []

    def new_row(engine: str, mode: dict) -> SweepRow:
        row = SweepRow(plan.axis, float(value), engine, plan.master_seed, alpha, "")
        row.mode = _mode_tag({**mode, "policy": policy.label(), **_scenario(config)})
        rows.append(row)
        return row

    sim_engines = [e for e in plan.engines if e in ("sim", "mean-degree")]
    if sim_engines:
        sim_mode = {
            "post": plan.post_mode.value,
            "iterations": plan.iterations,
            "stratified": int(plan.stratify and isinstance(policy, UniformCount)),
        }
        try:
            record = simulate(
                config, policy, plan.iterations, plan.master_seed, plan.post_mode, plan.workers, plan.stratify
            )
        except (ArithmeticError, InvalidParameter) as exc:
            record, failure = None, exc
        for engine in plan.engines:
            if engine not in sim_engines:
                continue
            row = new_row(engine, sim_mode)
            try:
                if record is None:
                    raise failure
                if engine == "sim":
                    row.set_estimate(robustness_from_record(record))
                    if extras & set(PRE_POST):
                        row.pre_success = float(record.pre.mean())
                        row.post_success = float(record.post.mean())
                    if extras & set(PCT):
                        bd = breakdown_from_record(record)
                        row.pct_fail_nodes, row.pct_fail_chs = bd.pct_failing_nodes, bd.pct_failing_chs
                else:
                    row.set_estimate(degree_ratio_from_record(record))
            except (NoSuccessBaseline, DegenerateDegree, ArithmeticError, InvalidParameter) as exc:
                _tag_error(row, exc)

    for engine in plan.engines:
        if not engine.startswith("analytic"):
            continue
        kind = analytic.Engine.EXACT_MC if engine == "analytic-exact" else analytic.Engine.APPROXIMATED
        mode = analytic.AnalyticMode(kind, plan.counts)
        settings = plan.settings()
        tag = {"counts": plan.counts.value, "order_2d": settings.order_2d, "order_4d": settings.order_4d}
        if kind is analytic.Engine.EXACT_MC:
            tag.update(iterations=settings.mc_samples)
        row = new_row(engine, tag)
        try:
            ev = analytic.evaluate_chain(config, mode, settings, policy)
            half = 1.96 * ev.std_error
            row.robustness, row.std_error = ev.robustness, ev.std_error
            row.ci_lo, row.ci_hi = ev.robustness - half, ev.robustness + half
            if extras & set(PRE_POST):
                row.pre_success, row.post_success = ev.terms.n_espa, ev.terms.l3
            if extras & set(PCT):
                row.pct_fail_nodes = 100.0 * (1.0 - ev.robustness)
        except (ArithmeticError, InvalidParameter) as exc:
            _tag_error(row, exc)

    order = {e: i for i, e in enumerate(plan.engines)}
    rows.sort(key=lambda r: order[r.engine])
    return rows


def _tag_error(row: SweepRow, exc: Exception) -> None:
    row.error = type(exc).__name__
    row.mode = f"{row.mode};error={row.error}"


def run_sweep(plan: SweepPlan, progress: Optional[Callable[[str], None]] = None) -> SweepResult:
    """Evaluate every engine at every axis value, in plan order."""
    result = SweepResult(plan)
    for i, value in enumerate(plan.values, 1):
        if progress:
            progress(f"[{i}/{len(plan.values)}] {plan.axis}={value:g}")
        result.rows.extend(_evaluate_point(plan, value))
    return result


FIGURES = {
    "fig3": dict(axis="n_nodes", values=(50, 100, 150), engines=("sim", "analytic-exact"), extras=()),
    "fig4": dict(
        axis="ch_probability",
        values=tuple(round(0.1 * i, 1) for i in range(1, 10)),
        engines=("sim", "analytic-approx", "mean-degree"),
        extras=(),
    ),
    "fig5": dict(
        axis="ch_probability",
        values=tuple(round(0.1 * i, 1) for i in range(1, 10)),
        engines=("sim", "analytic-approx"),
        extras=PRE_POST,
    ),
    "fig6": dict(
        axis="ch_probability",
        values=tuple(round(0.1 * i, 1) for i in range(1, 10)),
        engines=("sim",),
        extras=PCT,
    ),
    "fig7": dict(
        axis="failure_q",
        values=tuple(round(0.2 * i, 1) for i in range(0, 5)),
        engines=("sim", "analytic-approx"),
        extras=(),
    ),
}


def figure_plan(name: str, base: NetworkConfig, **overrides) -> SweepPlan:
    if name not in FIGURES:
        raise UsageError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    spec = dict(FIGURES[name])
    spec.update({k: v for k, v in overrides.items() if v is not None})
    spec["values"] = tuple(spec["values"])
    spec["engines"] = tuple(spec["engines"])
    return SweepPlan(base=base, **spec)


def run_figure(name: str, base: NetworkConfig, progress=None, **overrides) -> SweepResult:
    """Sweep with the axis, values, engines and columns of one published figure."""
    return run_sweep(figure_plan(name, base, **overrides), progress)


def stderr_progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)
