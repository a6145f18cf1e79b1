"""Analytic expectation chain for the temporal robustness ratio.

Pre-disruption: the mean NCH failure probability (exact joint expectation by
position Monte Carlo, or the factorized quadrature approximation), the mean
CH success probability, and the expected success count ``N_ESPA``.

Post-disruption: ``l0`` (fixed K removed nodes of which R are CHs),
``l1`` (average over R, hypergeometric), ``l2`` (average over K) and
``l3`` (average over the binomial CH count, or evaluated at the expected
CH count in approximated mode).  Robustness is ``l3 / N_ESPA``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import integrate as ig
from .linkprob import bs_exponent, nch_ch_exponent
from .model import (
    DisruptionPolicy,
    InvalidParameter,
    NetworkConfig,
    NoSuccessBaseline,
    RobustnessEstimate,
    UniformCount,
    binom_pmf,
    floor_count,
    log_binom,
)

_FNCH_STREAM = 0x464E4348  # substream tag for per-N_CH position sampling


class Engine(enum.Enum):
    EXACT_MC = "exact-mc"
    APPROXIMATED = "approximated"


class Counts(enum.Enum):
    FLOORED = "floored"
    SMOOTH = "smooth"


@dataclass(frozen=True)
class AnalyticMode:
    engine: Engine = Engine.APPROXIMATED
    counts: Counts = Counts.FLOORED

    def label(self) -> str:
        return f"{self.engine.value}/{self.counts.value}"


@dataclass(frozen=True)
class AnalyticSettings:
    """Numerical knobs for the analytic engine."""

    order_2d: int = ig.DEFAULT_ORDER_2D
    order_4d: int = ig.DEFAULT_ORDER_4D
    mc_samples: int = 4000
    seed: int = 0
    # Recompute P_FNCH at the surviving CH count after removal. Off by
    # default: the chain reuses the full-population value.
    rescaled: bool = False

    def spec_2d(self, config: NetworkConfig) -> ig.QuadratureSpec:
        return ig.QuadratureSpec(self.order_2d, config.half_width)

    def spec_4d(self, config: NetworkConfig) -> ig.QuadratureSpec:
        return ig.QuadratureSpec(self.order_4d, config.half_width)


@dataclass(frozen=True)
class DisruptionChainTerms:
    p_fnch: float
    p_sch: float
    n_espa: float = 0.0
    l3: float = 0.0
    # Optional P_FNCH indexed by CH count, used by the rescaled variant.
    p_fnch_by_ch: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        for name in ("p_fnch", "p_sch"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameter(name, f"probability must lie in [0, 1], got {v!r}")


# ---------------------------------------------------------------------------
# Pre-disruption terms
# ---------------------------------------------------------------------------


def _fbe_batch(points: np.ndarray, pw) -> np.ndarray:
    """P_FBE for rows ``[x_j, y_j, x_1, y_1, ..., x_n, y_n]``."""
    rj = points[:, :2]
    direct_fail = -np.expm1(-bs_exponent(rj[:, 0], rj[:, 1], pw))
    if points.shape[1] == 2:
        return direct_fail
    ri = points[:, 2:].reshape(len(points), -1, 2)
    z = nch_ch_exponent(ri[..., 0] - rj[:, None, 0], ri[..., 1] - rj[:, None, 1], pw)
    z = z + bs_exponent(ri[..., 0], ri[..., 1], pw)
    return np.prod(-np.expm1(-z), axis=1) * direct_fail


def fnch_seed(seed: int, n_ch: int) -> int:
    """Per-(seed, N_CH) substream seed for the exact P_FNCH estimate."""
    ss = np.random.SeedSequence([int(seed), _FNCH_STREAM, int(n_ch)])
    return int(ss.generate_state(1, np.uint64)[0])


def p_fnch_exact(config: NetworkConfig, n_ch: int, samples: int, seed: int) -> ig.McIntegrationResult:
    """Monte Carlo estimate of the mean NCH failure probability with ``n_ch`` CHs.

    Samples the NCH and all CH positions jointly, so the dependence through
    the shared NCH position is kept.
    """
    if not 0 <= n_ch <= config.n_nodes:
        raise InvalidParameter("n_ch", f"must lie in [0, {config.n_nodes}], got {n_ch!r}")
    pw = config.linear_powers()
    return ig.mc_mean(
        lambda pts: _fbe_batch(pts, pw),
        dim=2 * (n_ch + 1),
        samples=samples,
        seed=fnch_seed(seed, n_ch),
        half_width=config.half_width,
    )


@lru_cache(maxsize=256)
def relay_pair_failure_mean(config: NetworkConfig, spec: ig.QuadratureSpec) -> float:
    """Mean over NCH and CH positions of ``1 - exp(-(z1 + z2))``."""
    pw = config.linear_powers()

    def f(x, y, x1, y1):
        z = nch_ch_exponent(x - x1, y - y1, pw) + bs_exponent(x1, y1, pw)
        return -np.expm1(-z)

    return ig.integrate_mean_4d(f, spec)


@lru_cache(maxsize=256)
def direct_failure_mean(config: NetworkConfig, spec: ig.QuadratureSpec) -> float:
    """Mean over NCH position of ``1 - exp(-z_DBS)``."""
    pw = config.linear_powers()
    return ig.integrate_mean_2d(lambda x, y: -np.expm1(-bs_exponent(x, y, pw)), spec)


def p_fnch_approx(
    config: NetworkConfig,
    n_ch: float,
    spec_4d: Optional[ig.QuadratureSpec] = None,
    spec_2d: Optional[ig.QuadratureSpec] = None,
) -> float:
    """Factorized mean NCH failure probability.

    ``relay_pair_failure_mean ** n_ch * direct_failure_mean``. ``n_ch`` may
    be real-valued (smooth counts).
    """
    if not 0 <= n_ch <= config.n_nodes:
        raise InvalidParameter("n_ch", f"must lie in [0, {config.n_nodes}], got {n_ch!r}")
    a = config.half_width
    spec_4d = spec_4d or ig.QuadratureSpec(ig.DEFAULT_ORDER_4D, a)
    spec_2d = spec_2d or ig.QuadratureSpec(ig.DEFAULT_ORDER_2D, a)
    direct = direct_failure_mean(config, spec_2d)
    if n_ch == 0:
        return direct
    return relay_pair_failure_mean(config, spec_4d) ** n_ch * direct


@lru_cache(maxsize=256)
def p_sch(config: NetworkConfig, spec: Optional[ig.QuadratureSpec] = None) -> float:
    """Mean CH success probability (BS link present), averaged over position."""
    spec = spec or ig.QuadratureSpec(ig.DEFAULT_ORDER_2D, config.half_width)
    pw = config.linear_powers()
    return ig.integrate_mean_2d(lambda x, y: np.exp(-bs_exponent(x, y, pw)), spec)


def _counts(config: NetworkConfig, counts: Counts) -> tuple[float, float]:
    """(CH count, NCH count) used as multipliers in N_ESPA."""
    n, p = config.n_nodes, config.ch_probability
    if counts is Counts.FLOORED:
        return float(floor_count(n * p)), float(floor_count(n * (1.0 - p)))
    return n * p, n * (1.0 - p)


def _interp_bracket(x: float) -> tuple[int, int, float]:
    """Integer neighbours of ``x`` and the weight on the upper one."""
    lo = floor_count(x)
    t = x - lo
    if t <= 1e-9:
        return lo, lo, 0.0
    return lo, lo + 1, t


def n_espa_from_terms(n_ch_count: float, n_nch_count: float, p_fnch: float, p_sch_value: float) -> float:
    return n_nch_count * (1.0 - p_fnch) + n_ch_count * p_sch_value


# ---------------------------------------------------------------------------
# Disruption chain
# ---------------------------------------------------------------------------


def r_range(k: int, n_ch: int, n: int) -> tuple[int, int]:
    """Feasible range of removed CHs when ``k`` of ``n`` nodes (``n_ch`` CHs) fail."""
    if not (1 <= k <= n and 0 <= n_ch <= n):
        raise InvalidParameter("k", f"need 1 <= k <= n and 0 <= n_ch <= n, got k={k}, n_ch={n_ch}, n={n}")
    return max(0, k - n + n_ch), min(k, n_ch)


def p_fch(r: int, k: int, n_ch: int, n: int) -> float:
    """Hypergeometric probability that ``r`` of the ``k`` removed nodes are CHs."""
    r_min, r_max = r_range(k, n_ch, n)
    if not r_min <= r <= r_max:
        raise InvalidParameter("r", f"{r} outside feasible range [{r_min}, {r_max}]")
    return math.exp(log_binom(n_ch, r) + log_binom(n - n_ch, k - r) - log_binom(n, k))


def _p_fnch_for(terms: DisruptionChainTerms, surviving_ch: int) -> float:
    if terms.p_fnch_by_ch is None:
        return terms.p_fnch
    return terms.p_fnch_by_ch[surviving_ch]


def l0(k: int, r: int, n_ch: int, terms: DisruptionChainTerms, n: int) -> float:
    """Expected successes after removing ``k`` nodes of which ``r`` are CHs.

    ``k = r = 0`` is the undisturbed count for ``n_ch`` CHs.
    """
    if not (0 <= n_ch <= n and 0 <= k <= n):
        raise InvalidParameter("k", f"need 0 <= k <= n and 0 <= n_ch <= n, got k={k}, n_ch={n_ch}, n={n}")
    r_min, r_max = (0, 0) if k == 0 else r_range(k, n_ch, n)
    if not r_min <= r <= r_max:
        raise InvalidParameter("r", f"{r} outside feasible range [{r_min}, {r_max}]")
    pf = _p_fnch_for(terms, n_ch - r)
    return ((n - n_ch) - (k - r)) * (1.0 - pf) + (n_ch - r) * terms.p_sch


@lru_cache(maxsize=64)
def _log_factorials(n: int) -> list[float]:
    return [math.lgamma(i + 1) for i in range(n + 1)]


def l1(k: int, n_ch: int, terms: DisruptionChainTerms, n: int) -> float:
    """``l0`` averaged over the hypergeometric number of removed CHs."""
    if k == 0:
        return l0(0, 0, n_ch, terms, n)
    r_min, r_max = r_range(k, n_ch, n)
    lf = _log_factorials(n)
    n_nch = n - n_ch
    log_norm = lf[n] - lf[k] - lf[n - k]
    base = lf[n_ch] + lf[n_nch] - log_norm
    p_sch_value = terms.p_sch
    total = 0.0
    for r in range(r_min, r_max + 1):
        w = math.exp(base - lf[r] - lf[n_ch - r] - lf[k - r] - lf[n_nch - k + r])
        pf = _p_fnch_for(terms, n_ch - r)
        total += w * ((n_nch - (k - r)) * (1.0 - pf) + (n_ch - r) * p_sch_value)
    return total


def l2(n_ch: int, terms: DisruptionChainTerms, n: int, policy: DisruptionPolicy = UniformCount()) -> float:
    """``l1`` averaged over the removed count K (uniform on 1..N by default)."""
    pmf = policy.k_pmf(n)
    total = 0.0
    for k in range(n + 1):
        if pmf[k] > 0.0:
            total += pmf[k] * l1(k, n_ch, terms, n)
    return total


def l3_from_terms(
    n: int,
    p: float,
    terms_by_ch: Sequence[DisruptionChainTerms],
    policy: DisruptionPolicy = UniformCount(),
) -> float:
    """``l2`` averaged over the binomial CH count, one terms entry per N_CH."""
    if len(terms_by_ch) != n + 1:
        raise InvalidParameter("terms_by_ch", f"need {n + 1} entries, got {len(terms_by_ch)}")
    total = 0.0
    for n_ch in range(n + 1):
        w = binom_pmf(n_ch, n, p)
        # the loop runs for every N_CH even when its weight underflows
        value = l2(n_ch, terms_by_ch[n_ch], n, policy)
        total += w * value
    return total


def l3_at_count(n: int, n_ch: float, terms: DisruptionChainTerms, policy: DisruptionPolicy = UniformCount()) -> float:
    """``l2`` at the expected CH count; linear in between for a fractional count."""
    lo, hi, t = _interp_bracket(n_ch)
    value = l2(lo, terms, n, policy)
    if t:
        value = (1.0 - t) * value + t * l2(hi, terms, n, policy)
    return value


# ---------------------------------------------------------------------------
# Engine front ends
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainEvaluation:
    terms: DisruptionChainTerms
    robustness: float
    std_error: float
    p_fnch_by_ch: Optional[tuple[float, ...]] = None
    p_fnch_se_by_ch: Optional[tuple[float, ...]] = None


def _exact_fnch_table(config: NetworkConfig, settings: AnalyticSettings):
    results = [p_fnch_exact(config, m, settings.mc_samples, settings.seed) for m in range(config.n_nodes + 1)]
    return (
        tuple(min(1.0, max(0.0, r.estimate)) for r in results),
        tuple(r.std_error for r in results),
    )


def evaluate_chain(
    config: NetworkConfig,
    mode: AnalyticMode = AnalyticMode(),
    settings: AnalyticSettings = AnalyticSettings(),
    policy: DisruptionPolicy = UniformCount(),
) -> ChainEvaluation:
    """Run the whole chain and return every intermediate term."""
    n, p = config.n_nodes, config.ch_probability
    ps = p_sch(config, settings.spec_2d(config))
    ch_count, nch_count = _counts(config, mode.counts)
    espa_ch = ch_count if mode.counts is Counts.SMOOTH else float(config.n_ch_expected)

    if mode.engine is Engine.APPROXIMATED:
        spec4, spec2 = settings.spec_4d(config), settings.spec_2d(config)
        pf = p_fnch_approx(config, espa_ch, spec4, spec2)
        table = None
        if settings.rescaled:
            table = tuple(p_fnch_approx(config, m, spec4, spec2) for m in range(n + 1))
        ne = n_espa_from_terms(ch_count, nch_count, pf, ps)
        terms = DisruptionChainTerms(pf, ps, ne, 0.0, table)
        l3 = l3_at_count(n, espa_ch, terms, policy)
        terms = replace(terms, l3=l3)
        if ne <= 0:
            raise NoSuccessBaseline(f"expected pre-disruption successes is {ne!r}")
        return ChainEvaluation(terms, l3 / ne, 0.0, table)

    pf_table, se_table = _exact_fnch_table(config, settings)
    lo, hi, t = _interp_bracket(espa_ch)
    pf = (1.0 - t) * pf_table[lo] + t * pf_table[hi]
    ne = n_espa_from_terms(ch_count, nch_count, pf, ps)
    if ne <= 0:
        raise NoSuccessBaseline(f"expected pre-disruption successes is {ne!r}")

    rescaled = pf_table if settings.rescaled else None
    terms_by_ch = [DisruptionChainTerms(pf_table[m], ps, p_fnch_by_ch=rescaled) for m in range(n + 1)]
    l3 = l3_from_terms(n, p, terms_by_ch, policy)

    # delta-method error from the independent per-N_CH Monte Carlo estimates
    grad = np.zeros(n + 1)
    if not settings.rescaled:
        for m in range(n + 1):
            w = binom_pmf(m, n, p)
            if w and se_table[m]:
                # d l2 / d p_fnch = -(expected surviving NCH count)
                surviving_nch = l2(m, DisruptionChainTerms(0.0, 0.0), n, policy)
                grad[m] -= w * surviving_nch / ne
    d_ne = {lo: -nch_count * (1.0 - t), hi: -nch_count * t} if hi != lo else {lo: -nch_count}
    for m, d in d_ne.items():
        grad[m] -= l3 / ne**2 * d
    se = float(math.sqrt(np.sum((grad * np.asarray(se_table)) ** 2)))

    terms = DisruptionChainTerms(pf, ps, ne, l3, rescaled)
    return ChainEvaluation(terms, l3 / ne, se, pf_table, se_table)


def n_espa(
    config: NetworkConfig,
    mode: AnalyticMode = AnalyticMode(),
    settings: AnalyticSettings = AnalyticSettings(),
) -> float:
    """Expected number of successfully communicating nodes before disruption."""
    ps = p_sch(config, settings.spec_2d(config))
    ch_count, nch_count = _counts(config, mode.counts)
    espa_ch = ch_count if mode.counts is Counts.SMOOTH else float(config.n_ch_expected)
    lo, hi, t = _interp_bracket(espa_ch)
    if mode.engine is Engine.APPROXIMATED:
        pf = p_fnch_approx(config, espa_ch, settings.spec_4d(config), settings.spec_2d(config))
    else:
        pf_lo = p_fnch_exact(config, lo, settings.mc_samples, settings.seed).estimate
        pf_hi = p_fnch_exact(config, hi, settings.mc_samples, settings.seed).estimate if t else pf_lo
        pf = (1.0 - t) * pf_lo + t * pf_hi
    return n_espa_from_terms(ch_count, nch_count, pf, ps)


def l3(
    config: NetworkConfig,
    mode: AnalyticMode = AnalyticMode(),
    settings: AnalyticSettings = AnalyticSettings(),
    policy: DisruptionPolicy = UniformCount(),
) -> float:
    return evaluate_chain(config, mode, settings, policy).terms.l3


def robustness(
    config: NetworkConfig,
    mode: AnalyticMode = AnalyticMode(),
    settings: AnalyticSettings = AnalyticSettings(),
    policy: DisruptionPolicy = UniformCount(),
) -> RobustnessEstimate:
    """Analytic robustness ratio ``l3 / N_ESPA`` with provenance."""
    ev = evaluate_chain(config, mode, settings, policy)
    half = 1.96 * ev.std_error
    echo = {
        "alpha": config.path_loss_exponent,
        "mode": mode.label(),
        "order_2d": settings.order_2d,
        "order_4d": settings.order_4d,
        "policy": policy.label(),
        "rescaled": settings.rescaled,
    }
    iterations = 0
    if mode.engine is Engine.EXACT_MC:
        echo.update(seed=settings.seed, mc_samples=settings.mc_samples)
        iterations = settings.mc_samples
    return RobustnessEstimate(
        mean=ev.robustness,
        std_error=ev.std_error,
        ci95=(ev.robustness - half, ev.robustness + half),
        iterations=iterations,
        engine=f"analytic-{'exact' if mode.engine is Engine.EXACT_MC else 'approx'}",
        settings=echo,
    )
