"""Monte Carlo engine for the time-switching cluster network.

One realization is a snapshot: uniform positions, CH election, and one set
of Exp(1) fading gains.  The same snapshot is evaluated before and after the
disruption, so only the node set changes between the two counts.

Every realization draws from its own Philox substream keyed by
``(master_seed, index)``; aggregation uses integer counts, so results do
not depend on the number of workers.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .integrate import stream
from .model import (
    BernoulliPerNode,
    DegenerateDegree,
    DisruptionPolicy,
    FixedCount,
    InvalidParameter,
    NetworkConfig,
    NoSuccessBaseline,
    RobustnessEstimate,
    Role,
    UniformCount,
)

_REALIZATION_STREAM = 1
_DISRUPTION_STREAM = 2
_STRATA_STREAM = 3

MIN_ITERATIONS = 100


class PostMode(enum.Enum):
    REASSOCIATE = "reassociate"
    FROZEN = "frozen"


@dataclass(frozen=True, eq=False)
class Realization:
    positions: np.ndarray  # (N, 2)
    is_ch: np.ndarray  # (N,) bool
    gains_nch_ch: np.ndarray  # (n_nch, n_ch), h_ji
    gains_bs_ch: np.ndarray  # (n_ch,), g_ib
    gains_bs_nch: np.ndarray  # (n_nch,), k_jb
    master_seed: int
    index: int

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def roles(self) -> list[Role]:
        return [Role.CH if c else Role.NCH for c in self.is_ch]

    @property
    def ch_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.is_ch)

    @property
    def nch_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.is_ch)


def sample_realization(config: NetworkConfig, master_seed: int, index: int) -> Realization:
    rng = stream(master_seed, _REALIZATION_STREAM, index)
    n, a = config.n_nodes, config.half_width
    positions = rng.uniform(-a, a, size=(n, 2))
    # each node draws U[0,1) and elects itself CH when U < p
    is_ch = rng.random(n) < config.ch_probability
    bs_gains = rng.standard_exponential(n)
    n_ch = int(is_ch.sum())
    h = rng.standard_exponential((n - n_ch, n_ch))
    return Realization(positions, is_ch, h, bs_gains[is_ch], bs_gains[~is_ch], int(master_seed), int(index))


@dataclass(frozen=True, eq=False)
class LinkState:
    """Feasibility of every link in one realization (fading held fixed)."""

    ch_nodes: np.ndarray
    nch_nodes: np.ndarray
    ch_ok: np.ndarray  # BS -> CH
    relay_ok: np.ndarray  # (n_nch, n_ch): NCH -> CH and BS -> CH both hold
    direct_ok: np.ndarray  # BS -> NCH


def link_state(real: Realization, config: NetworkConfig) -> LinkState:
    pw = config.linear_powers()
    ch, nch = real.ch_nodes, real.nch_nodes
    r_ch, r_nch = real.positions[ch], real.positions[nch]
    with np.errstate(invalid="ignore", over="ignore"):
        need_ch = pw.p_th * np.hypot(r_ch[:, 0], r_ch[:, 1]) ** pw.alpha / pw.p_b
        need_nch = pw.p_th * np.hypot(r_nch[:, 0], r_nch[:, 1]) ** pw.alpha / pw.p_b
        d = np.hypot(r_nch[:, None, 0] - r_ch[None, :, 0], r_nch[:, None, 1] - r_ch[None, :, 1])
        need_pair = pw.p_th * d**pw.alpha / pw.p_t
    ch_ok = real.gains_bs_ch >= need_ch
    pair_ok = real.gains_nch_ch >= need_pair
    return LinkState(ch, nch, ch_ok, pair_ok & ch_ok[None, :], real.gains_bs_nch >= need_nch)


def _success_masks(state: LinkState, alive: np.ndarray, reassociate: bool = True):
    """Per-role success masks for the survivors ``alive`` (bool over nodes)."""
    ch_alive = alive[state.ch_nodes]
    nch_alive = alive[state.nch_nodes]
    relay_cols = ch_alive if reassociate else np.ones_like(ch_alive)
    nch_ok = state.direct_ok | state.relay_ok[:, relay_cols].any(axis=1)
    return state.ch_ok & ch_alive, nch_ok & nch_alive


def _as_mask(n: int, survivors: Optional[Iterable[int]]) -> np.ndarray:
    if survivors is None:
        return np.ones(n, dtype=bool)
    survivors = np.asarray(survivors)
    if survivors.dtype == bool:
        if survivors.shape != (n,):
            raise InvalidParameter("survivors", f"mask must have length {n}")
        return survivors
    mask = np.zeros(n, dtype=bool)
    idx = survivors.astype(int)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise InvalidParameter("survivors", f"node index outside 0..{n - 1}")
    mask[idx] = True
    return mask


def success_set(real: Realization, config: NetworkConfig, survivors=None) -> set[int]:
    """Nodes among ``survivors`` that reach the BS, with association recomputed.

    A CH needs its BS link. An NCH needs a surviving CH whose NCH->CH and
    BS->CH links both hold, or its own direct BS link.
    """
    state = link_state(real, config)
    ch_ok, nch_ok = _success_masks(state, _as_mask(real.n_nodes, survivors))
    return set(state.ch_nodes[ch_ok].tolist()) | set(state.nch_nodes[nch_ok].tolist())


def _remove_uniform_subset(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    alive = np.ones(n, dtype=bool)
    if k:
        alive[rng.choice(n, size=k, replace=False)] = False
    return alive


def apply_disruption(real: Realization, policy: DisruptionPolicy, rng: np.random.Generator) -> np.ndarray:
    """Survivor mask after one disruption drawn under ``policy``."""
    n = real.n_nodes
    if isinstance(policy, UniformCount):
        return _remove_uniform_subset(n, int(rng.integers(1, n + 1)), rng)
    if isinstance(policy, BernoulliPerNode):
        return rng.random(n) >= policy.q
    if isinstance(policy, FixedCount):
        if policy.k > n:
            raise InvalidParameter("k", f"cannot remove {policy.k} of {n} nodes")
        return _remove_uniform_subset(n, policy.k, rng)
    raise InvalidParameter("policy", f"unknown disruption policy {policy!r}")


# ---------------------------------------------------------------------------
# Batch simulation
# ---------------------------------------------------------------------------

RECORD_FIELDS = ("pre", "post", "pre_ch", "post_ch", "deg_pre", "deg_post", "n_ch", "k")


@dataclass(frozen=True, eq=False)
class SimulationRecord:
    """Per-realization integer counts; column ``i`` belongs to realization ``i``."""

    counts: np.ndarray  # (len(RECORD_FIELDS), iterations) int64
    strata_order: Optional[np.ndarray]  # realization indices sorted by K stratum
    config: NetworkConfig
    policy: DisruptionPolicy
    post_mode: PostMode
    master_seed: int

    def __getattr__(self, name):
        try:
            return self.counts[RECORD_FIELDS.index(name)]
        except ValueError:
            raise AttributeError(name) from None

    @property
    def iterations(self) -> int:
        return self.counts.shape[1]


def _strata_permutation(master_seed: int, iterations: int) -> np.ndarray:
    return stream(master_seed, _STRATA_STREAM, iterations).permutation(iterations)


def _stratified_k(n: int, stratum: int, iterations: int, rng: np.random.Generator) -> int:
    # stratum s covers u in [s/M, (s+1)/M); a random stratum per realization
    # keeps K marginally uniform on 1..N
    u = (stratum + rng.random()) / iterations
    return min(n, int(u * n) + 1)


def _simulate_one(config, policy, master_seed, index, reassociate, stratum, iterations):
    real = sample_realization(config, master_seed, index)
    state = link_state(real, config)
    rng = stream(master_seed, _DISRUPTION_STREAM, index)
    n = real.n_nodes
    if stratum is not None:
        k = _stratified_k(n, stratum, iterations, rng)
        alive = _remove_uniform_subset(n, k, rng)
    else:
        alive = apply_disruption(real, policy, rng)
        k = n - int(alive.sum())

    everyone = np.ones(n, dtype=bool)
    pre_ch, pre_nch = _success_masks(state, everyone)
    post_ch, post_nch = _success_masks(state, alive, reassociate)

    ch_alive = alive[state.ch_nodes]
    nch_alive = alive[state.nch_nodes]
    deg_pre = 2 * int(state.relay_ok.sum()) + int(state.ch_ok.sum()) + int(state.direct_ok.sum())
    deg_post = (
        2 * int(state.relay_ok[np.ix_(nch_alive, ch_alive)].sum())
        + int(state.ch_ok[ch_alive].sum())
        + int(state.direct_ok[nch_alive].sum())
    )
    return (
        int(pre_ch.sum() + pre_nch.sum()),
        int(post_ch.sum() + post_nch.sum()),
        int(pre_ch.sum()),
        int(post_ch.sum()),
        deg_pre,
        deg_post,
        len(state.ch_nodes),
        k,
    )


def _simulate_chunk(args):
    config, policy, master_seed, indices, reassociate, strata, iterations = args
    out = np.empty((len(RECORD_FIELDS), len(indices)), dtype=np.int64)
    for col, index in enumerate(indices):
        stratum = None if strata is None else int(strata[col])
        out[:, col] = _simulate_one(config, policy, master_seed, index, reassociate, stratum, iterations)
    return out


def simulate(
    config: NetworkConfig,
    policy: DisruptionPolicy = UniformCount(),
    iterations: int = 10_000,
    master_seed: int = 0,
    post_mode: PostMode = PostMode.REASSOCIATE,
    workers: int = 1,
    stratify: bool = True,
) -> SimulationRecord:
    """Simulate ``iterations`` independent realizations and keep their counts.

    With ``stratify`` (UniformCount only), K is drawn by stratified sampling:
    realization ``i`` gets a distinct stratum of the uniform law, so the
    removed counts cover 1..N evenly while each K stays marginally uniform.
    """
    if iterations < MIN_ITERATIONS:
        raise InvalidParameter("iterations", f"need at least {MIN_ITERATIONS}, got {iterations!r}")
    reassociate = post_mode is PostMode.REASSOCIATE
    strata = None
    if stratify and isinstance(policy, UniformCount):
        strata = _strata_permutation(master_seed, iterations)

    indices = np.arange(iterations)
    n_chunks = max(1, workers) * 4 if workers > 1 else 1
    bounds = np.linspace(0, iterations, n_chunks + 1).astype(int)
    jobs = [
        (config, policy, master_seed, indices[lo:hi], reassociate, None if strata is None else strata[lo:hi], iterations)
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_chunk, jobs))
    else:
        parts = [_simulate_chunk(job) for job in jobs]
    counts = np.concatenate(parts, axis=1)
    order = None if strata is None else np.argsort(strata, kind="stable")
    return SimulationRecord(counts, order, config, policy, post_mode, int(master_seed))


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def ratio_of_sums(y: np.ndarray, x: np.ndarray, strata_order: Optional[np.ndarray] = None) -> tuple[float, float]:
    """``sum(y) / sum(x)`` and its delta-method standard error.

    With ``strata_order`` the linearized residuals are paired along adjacent
    strata (collapsed-strata variance), otherwise treated as i.i.d.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    sx = float(x.sum())
    if sx == 0:
        raise ZeroDivisionError("denominator sum is zero")
    ratio = float(y.sum()) / sx
    resid = y - ratio * x
    m = len(resid)
    if strata_order is None:
        var_total = m * float(resid.var(ddof=1))
    else:
        e = resid[strata_order]
        paired = e[: m - m % 2].reshape(-1, 2)
        var_total = float(np.sum((paired[:, 0] - paired[:, 1]) ** 2))
        if m % 2:
            var_total += var_total / max(1, len(paired)) / 2.0
    return ratio, math.sqrt(var_total) / sx


def _estimate(mean: float, se: float, iterations: int, engine: str, settings: dict) -> RobustnessEstimate:
    half = 1.96 * se
    # containment keeps every ratio estimate inside [0, 1]
    return RobustnessEstimate(mean, se, (max(0.0, mean - half), min(1.0, mean + half)), iterations, engine, settings)


def _settings(record: SimulationRecord) -> dict:
    return {
        "alpha": record.config.path_loss_exponent,
        "seed": record.master_seed,
        "policy": record.policy.label(),
        "post_mode": record.post_mode.value,
        "stratified": record.strata_order is not None,
    }


def robustness_from_record(record: SimulationRecord) -> RobustnessEstimate:
    if record.pre.sum() == 0:
        raise NoSuccessBaseline("no node succeeded before disruption in any realization")
    mean, se = ratio_of_sums(record.post, record.pre, record.strata_order)
    return _estimate(mean, se, record.iterations, "sim", _settings(record))


def degree_ratio_from_record(record: SimulationRecord) -> RobustnessEstimate:
    if record.deg_pre.sum() == 0:
        raise DegenerateDegree("mean degree before disruption is zero")
    mean, se = ratio_of_sums(record.deg_post, record.deg_pre, record.strata_order)
    return _estimate(mean, se, record.iterations, "mean-degree", _settings(record))


@dataclass(frozen=True)
class FailureBreakdown:
    pct_failing_nodes: float
    pct_failing_chs: float
    se_failing_nodes: float = 0.0
    se_failing_chs: float = 0.0


def breakdown_from_record(record: SimulationRecord) -> FailureBreakdown:
    if record.pre.sum() == 0:
        raise NoSuccessBaseline("no node succeeded before disruption in any realization")
    order = record.strata_order
    kept, se_nodes = ratio_of_sums(record.post, record.pre, order)
    if record.pre_ch.sum() > 0:
        kept_ch, se_chs = ratio_of_sums(record.post_ch, record.pre_ch, order)
        pct_chs = 100.0 * (1.0 - kept_ch)
    else:
        pct_chs, se_chs = math.nan, math.nan
    return FailureBreakdown(100.0 * (1.0 - kept), pct_chs, 100.0 * se_nodes, 100.0 * se_chs)


def estimate_robustness(
    config: NetworkConfig,
    policy: DisruptionPolicy = UniformCount(),
    iterations: int = 10_000,
    master_seed: int = 0,
    post_mode: PostMode = PostMode.REASSOCIATE,
    workers: int = 1,
    stratify: bool = True,
) -> RobustnessEstimate:
    """Ratio of summed post-disruption to summed pre-disruption successes."""
    return robustness_from_record(simulate(config, policy, iterations, master_seed, post_mode, workers, stratify))


def mean_degree_metric(
    config: NetworkConfig,
    policy: DisruptionPolicy = UniformCount(),
    iterations: int = 10_000,
    master_seed: int = 0,
    workers: int = 1,
    stratify: bool = True,
) -> RobustnessEstimate:
    """Post/pre ratio of the network mean degree.

    A relay pair (NCH->CH and BS->CH both feasible) adds one to each
    endpoint; a feasible BS link adds one to its node. Removed nodes keep
    degree 0 in the 1/N normalization, which cancels in the ratio.
    """
    return degree_ratio_from_record(simulate(config, policy, iterations, master_seed, workers=workers, stratify=stratify))


def failure_breakdown(
    config: NetworkConfig,
    policy: DisruptionPolicy = UniformCount(),
    iterations: int = 10_000,
    master_seed: int = 0,
    post_mode: PostMode = PostMode.REASSOCIATE,
    workers: int = 1,
    stratify: bool = True,
) -> FailureBreakdown:
    return breakdown_from_record(simulate(config, policy, iterations, master_seed, post_mode, workers, stratify))
