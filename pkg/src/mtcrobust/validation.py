"""Self-check suite behind ``mtcrobust validate``.

Each check compares a library path against an independent route (closed
form, enumeration, or a fading Monte Carlo) and reports pass/fail.  Full
mode runs every check even after a failure.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import analytic, linkprob
from .integrate import QuadratureSpec, stream
from .model import (
    LinearPowers,
    NetworkConfig,
    Position,
    binom_pmf,
    default_config,
    dbm_to_linear,
)
from .simulator import PostMode, simulate, robustness_from_record


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass
class ValidationReport:
    level: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail} ({c.seconds:.1f}s)" for c in self.checks]
        out.append(f"{'PASS' if self.passed else 'FAIL'}  {len(self.checks)} checks, level={self.level}")
        return out


def enumerate_l3(n: int, p: float, p_fnch_by_ch, p_sch: float) -> float:
    """Expected post-disruption successes by exhaustive enumeration.

    Every CH assignment (2^n) and every removal subset of every size 1..n.
    """
    total = 0.0
    nodes = range(n)
    for roles in itertools.product((0, 1), repeat=n):
        n_ch = sum(roles)
        weight = p**n_ch * (1 - p) ** (n - n_ch)
        if weight == 0.0:
            continue
        pf = p_fnch_by_ch[n_ch]
        per_k = 0.0
        for k in range(1, n + 1):
            subsets = list(itertools.combinations(nodes, k))
            acc = 0.0
            for removed in subsets:
                gone = set(removed)
                acc += sum((p_sch if roles[i] else 1.0 - pf) for i in nodes if i not in gone)
            per_k += acc / len(subsets)
        total += weight * per_k / n
    return total


def _check_pmfs(rng: np.random.Generator, trials: int) -> str:
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 400))
        k = int(rng.integers(1, n + 1))
        n_ch = int(rng.integers(0, n + 1))
        lo, hi = analytic.r_range(k, n_ch, n)
        worst = max(worst, abs(math.fsum(analytic.p_fch(r, k, n_ch, n) for r in range(lo, hi + 1)) - 1.0))
        p = float(rng.random())
        worst = max(worst, abs(math.fsum(binom_pmf(m, n, p) for m in range(n + 1)) - 1.0))
    if worst > 1e-10:
        raise AssertionError(f"max normalization error {worst:.3g}")
    return f"max normalization error {worst:.2g} over {trials} draws"


def _check_perfect_connectivity(sim_iterations: int) -> str:
    notes = []
    for n in (10, 50, 150):
        cfg = default_config().with_nodes(n).with_(p_threshold_dbm=-400.0)
        target = (n - 1) / (2 * n)
        for engine in analytic.Engine:
            mode = analytic.AnalyticMode(engine, analytic.Counts.SMOOTH)
            got = analytic.robustness(cfg, mode, analytic.AnalyticSettings(mc_samples=200)).mean
            if abs(got - target) > 1e-9:
                raise AssertionError(f"N={n} {engine.value}: {got!r} != {target!r}")
        if sim_iterations:
            est = robustness_from_record(simulate(cfg, iterations=sim_iterations, master_seed=7))
            if abs(est.mean - target) > 3 * max(est.std_error, 1e-15):
                raise AssertionError(f"N={n} sim {est.mean} vs {target} (se {est.std_error:.2g})")
        notes.append(f"N={n}")
    return "analytic and sim match (N-1)/(2N) for " + ", ".join(notes)


def _check_bruteforce(max_n: int) -> str:
    rng = stream(11, 0)
    worst = 0.0
    for n in range(1, max_n + 1):
        p = float(rng.uniform(0.05, 0.95))
        pf = tuple(float(v) for v in rng.random(n + 1))
        ps = float(rng.random())
        terms = [analytic.DisruptionChainTerms(pf[m], ps) for m in range(n + 1)]
        got = analytic.l3_from_terms(n, p, terms)
        want = enumerate_l3(n, p, pf, ps)
        worst = max(worst, abs(got - want))
    if worst > 1e-10:
        raise AssertionError(f"max |chain - enumeration| = {worst:.3g}")
    return f"l3 matches enumeration for N <= {max_n} (max error {worst:.2g})"


def _check_quadrature(config: NetworkConfig) -> str:
    worst = 0.0
    for order2, order4 in ((32, 16),):
        a = config.half_width
        pairs = [
            (analytic.direct_failure_mean, QuadratureSpec(order2, a)),
            (analytic.relay_pair_failure_mean, QuadratureSpec(order4, a)),
            (analytic.p_sch, QuadratureSpec(order2, a)),
        ]
        for fn, spec in pairs:
            worst = max(worst, abs(fn(config, spec) - fn(config, spec.doubled())))
    if worst > 1e-6:
        raise AssertionError(f"order doubling moved an integral by {worst:.3g}")
    return f"order doubling changes integrals by <= {worst:.2g}"


def fading_mc_fbe(r_j: Position, chs: list[Position], pw: LinearPowers, draws: int, seed: int) -> tuple[float, float]:
    """Frequency of NCH failure over independent Exp(1) gain draws."""
    rng = stream(seed, len(chs))
    need_direct = pw.p_th * r_j.norm() ** pw.alpha / pw.p_b
    fail = rng.standard_exponential(draws) < need_direct
    for c in chs:
        need_pair = pw.p_th * math.hypot(r_j.x - c.x, r_j.y - c.y) ** pw.alpha / pw.p_t
        need_bs = pw.p_th * c.norm() ** pw.alpha / pw.p_b
        relay = (rng.standard_exponential(draws) >= need_pair) & (rng.standard_exponential(draws) >= need_bs)
        fail &= ~relay
    freq = float(fail.mean())
    return freq, math.sqrt(max(freq * (1 - freq), 1.0 / draws) / draws)


def _check_fading_oracle(geometries: int, draws: int) -> str:
    rng = stream(23, 0)
    worst = 0.0
    for g in range(geometries):
        a = float(rng.uniform(1.0, 4.0))
        pw = LinearPowers(dbm_to_linear(23.0), dbm_to_linear(30.0), dbm_to_linear(float(rng.uniform(10, 25))), 3.0)
        pts = rng.uniform(-a, a, size=(int(rng.integers(0, 5)) + 1, 2))
        r_j = Position(*pts[0])
        chs = [Position(*p) for p in pts[1:]]
        exact = linkprob.p_fbe(r_j, chs, pw)
        freq, se = fading_mc_fbe(r_j, chs, pw, draws, seed=1000 + g)
        z = abs(freq - exact) / se
        worst = max(worst, z)
        if z > 4:
            raise AssertionError(f"geometry {g}: p_fbe {exact:.6f} vs MC {freq:.6f} ({z:.1f} se)")
    return f"p_fbe within {worst:.2f} se of {draws}-draw fading MC on {geometries} geometries"


def _check_containment(iterations: int) -> str:
    cfg = NetworkConfig(n_nodes=25, ch_probability=0.3, node_density=1.0, p_tx_node_dbm=40.0, p_threshold_dbm=28.0)
    cfg = cfg.with_()
    for mode in PostMode:
        rec = simulate(cfg, iterations=iterations, master_seed=5, post_mode=mode)
        if np.any(rec.post > rec.pre) or np.any(rec.post_ch > rec.pre_ch):
            raise AssertionError(f"{mode.value}: post-disruption successes exceed pre-disruption")
    return "post <= pre in every realization for both post modes"


def run_validate(level: str = "fast", log: Callable[[str], None] | None = None) -> ValidationReport:
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    full = level == "full"
    checks = [
        ("pmf normalization", lambda: _check_pmfs(stream(3, 0), 500 if full else 100)),
        ("perfect connectivity", lambda: _check_perfect_connectivity(10_000 if full else 0)),
        ("brute-force chain", lambda: _check_bruteforce(6 if full else 5)),
        ("quadrature doubling", lambda: _check_quadrature(default_config())),
        ("fading oracle", lambda: _check_fading_oracle(20 if full else 3, 1_000_000 if full else 100_000)),
        ("containment", lambda: _check_containment(2000 if full else 200)),
    ]
    report = ValidationReport(level)
    for name, fn in checks:
        start = time.perf_counter()
        try:
            detail, ok = fn(), True
        except Exception as exc:  # every check reports, none aborts the run
            detail, ok = f"{type(exc).__name__}: {exc}", False
        result = CheckResult(name, ok, detail, time.perf_counter() - start)
        report.checks.append(result)
        if log:
            log(report.lines()[len(report.checks) - 1])
    return report
