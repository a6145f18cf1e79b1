import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtcrobust import analytic, simulator
from mtcrobust.model import (
    BernoulliPerNode,
    FixedCount,
    InvalidParameter,
    NetworkConfig,
    NoSuccessBaseline,
    UniformCount,
    default_config,
    validate,
)
from mtcrobust.simulator import (
    PostMode,
    Realization,
    breakdown_from_record,
    ratio_of_sums,
    robustness_from_record,
    sample_realization,
    simulate,
    success_set,
)


def brute_success(real, cfg, survivors):
    """Node-by-node reading of the success rules with scalar math."""
    pw = cfg.linear_powers()
    pos = real.positions
    chs = [int(i) for i in real.ch_nodes]
    nchs = [int(j) for j in real.nch_nodes]
    bs = {}
    for col, i in enumerate(chs):
        bs[i] = real.gains_bs_ch[col]
    for row, j in enumerate(nchs):
        bs[j] = real.gains_bs_nch[row]

    def bs_link(v):
        d = math.hypot(*pos[v])
        return pw.p_b * d ** (-pw.alpha) * bs[v] >= pw.p_th if d > 0 else True

    out = set()
    for i in chs:
        if i in survivors and bs_link(i):
            out.add(i)
    for row, j in enumerate(nchs):
        if j not in survivors:
            continue
        if bs_link(j):
            out.add(j)
            continue
        for col, i in enumerate(chs):
            if i not in survivors:
                continue
            d = math.hypot(*(pos[j] - pos[i]))
            if pw.p_t * d ** (-pw.alpha) * real.gains_nch_ch[row, col] >= pw.p_th and bs_link(i):
                out.add(j)
                break
    return out


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 2**32), st.data())
def test_success_set_matches_brute_force(index, seed, data):
    cfg = validate(NetworkConfig(12, 0.4, p_tx_node_dbm=40.0, p_threshold_dbm=28.0, node_density=1.0))
    real = sample_realization(cfg, seed, index)
    survivors = set(data.draw(st.sets(st.integers(0, 11))))
    assert success_set(real, cfg, sorted(survivors)) == brute_success(real, cfg, survivors)
    assert success_set(real, cfg) == brute_success(real, cfg, set(range(12)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.data())
def test_removal_only_shrinks_success(index, data):
    cfg = validate(NetworkConfig(15, 0.3, p_tx_node_dbm=40.0, p_threshold_dbm=28.0, node_density=1.0))
    real = sample_realization(cfg, 3, index)
    big = data.draw(st.sets(st.integers(0, 14)))
    small = data.draw(st.sets(st.sampled_from(sorted(big)))) if big else set()
    after = success_set(real, cfg, sorted(small))
    assert after <= success_set(real, cfg, sorted(big)) & small


def test_hand_built_realization():
    cfg = validate(NetworkConfig(3, 0.5, p_tx_node_dbm=0.0, p_tx_bs_dbm=0.0, p_threshold_dbm=0.0, grid_half_width=10.0))
    # node 0 is a CH at distance 1 from the BS, nodes 1 and 2 are NCHs
    positions = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 5.0]])
    real = Realization(
        positions=positions,
        is_ch=np.array([True, False, False]),
        gains_nch_ch=np.array([[1.5], [0.5]]),  # node 1 is 1 away, node 2 is ~5.1 away
        gains_bs_ch=np.array([1.0]),  # needs 1^3 = 1
        gains_bs_nch=np.array([0.1, 200.0]),  # node 1 needs 8, node 2 needs 125
        master_seed=0,
        index=0,
    )
    assert success_set(real, cfg) == {0, 1, 2}
    # without the CH, node 1 loses its relay and its direct link is too weak
    assert success_set(real, cfg, [1, 2]) == {2}
    with pytest.raises(InvalidParameter):
        success_set(real, cfg, [5])


def test_realizations_are_reproducible(stress):
    a = simulate(stress, iterations=300, master_seed=4)
    b = simulate(stress, iterations=300, master_seed=4)
    c = simulate(stress, iterations=300, master_seed=5)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)


def test_workers_do_not_change_results(stress):
    serial = simulate(stress, iterations=400, master_seed=2)
    parallel = simulate(stress, iterations=400, master_seed=2, workers=2)
    assert np.array_equal(serial.counts, parallel.counts)


@pytest.mark.parametrize("mode", list(PostMode))
def test_containment(stress, mode):
    rec = simulate(stress, iterations=1000, master_seed=1, post_mode=mode)
    assert np.all(rec.post <= rec.pre)
    assert np.all(rec.post_ch <= rec.pre_ch)
    assert np.all(rec.deg_post <= rec.deg_pre)
    assert np.all(rec.post <= stress.n_nodes - rec.k)


def test_frozen_association_never_below_reassociation(stress):
    re = simulate(stress, iterations=1000, master_seed=6, post_mode=PostMode.REASSOCIATE)
    fr = simulate(stress, iterations=1000, master_seed=6, post_mode=PostMode.FROZEN)
    assert np.array_equal(re.pre, fr.pre)
    assert np.all(fr.post >= re.post)


def test_stratified_k_is_even_over_counts():
    cfg = default_config().with_nodes(20)
    rec = simulate(cfg, iterations=2000, master_seed=0)
    counts = np.bincount(rec.k, minlength=21)[1:]
    assert counts.min() >= 99 and counts.max() <= 101


def test_unstratified_k_is_uniform():
    cfg = default_config().with_nodes(10)
    rec = simulate(cfg, iterations=5000, master_seed=0, stratify=False)
    counts = np.bincount(rec.k, minlength=11)[1:]
    chi2 = float(np.sum((counts - 500.0) ** 2 / 500.0))
    assert rec.k.min() >= 1 and rec.k.max() <= 10
    assert chi2 < 27.9  # 0.999 quantile of chi-square with 9 dof


def test_bernoulli_and_fixed_policies():
    cfg = default_config().with_nodes(50)
    rec = simulate(cfg, BernoulliPerNode(0.3), iterations=2000, master_seed=1)
    assert rec.k.mean() == pytest.approx(15.0, abs=4 * math.sqrt(50 * 0.21 / 2000))
    fixed = simulate(cfg, FixedCount(7), iterations=200, master_seed=1)
    assert np.all(fixed.k == 7)


def test_ch_election_rate(stress):
    rec = simulate(stress, iterations=2000, master_seed=8)
    n, p = stress.n_nodes, stress.ch_probability
    assert rec.n_ch.mean() == pytest.approx(n * p, abs=4 * math.sqrt(n * p * (1 - p) / 2000))


def test_ratio_of_sums_iid_error():
    rng = np.random.default_rng(0)
    x = rng.integers(5, 30, 500).astype(float)
    y = np.floor(x * rng.random(500))
    r, se = ratio_of_sums(y, x)
    assert r == pytest.approx(y.sum() / x.sum())
    resid = y - r * x
    want = math.sqrt(np.sum(resid**2) / (len(x) * (len(x) - 1))) / x.mean()
    assert se == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("stratify, low", [(False, 0.6), (True, 0.3)])
def test_ratio_of_sums_error_is_calibrated(stratify, low):
    # repeated independent sims: the spread of estimates should match the reported
    # error; the collapsed-strata error may be conservative, never optimistic
    cfg = validate(NetworkConfig(20, 0.3, p_tx_node_dbm=40.0, p_threshold_dbm=28.0, node_density=1.0))
    ests = [robustness_from_record(simulate(cfg, iterations=400, master_seed=s, stratify=stratify)) for s in range(40)]
    spread = float(np.std([e.mean for e in ests], ddof=1))
    typical = float(np.mean([e.std_error for e in ests]))
    assert low < spread / typical < 1.5


def test_perfect_connectivity_sim():
    cfg = default_config().with_nodes(50).with_(p_threshold_dbm=-400.0)
    est = robustness_from_record(simulate(cfg, iterations=2000, master_seed=3))
    assert abs(est.mean - 49 / 100) <= 3 * est.std_error + 1e-12
    assert est.engine == "sim"
    assert est.ci95[0] <= est.mean <= est.ci95[1]


def test_sim_counts_agree_with_exact_chain_under_frozen_association(stress):
    # the chain keeps links to removed CHs out of the picture only through N_CH,
    # which is what frozen association simulates
    rec = simulate(stress, iterations=10_000, master_seed=11, post_mode=PostMode.FROZEN)
    ev = analytic.evaluate_chain(
        stress, analytic.AnalyticMode(analytic.Engine.EXACT_MC), analytic.AnalyticSettings(mc_samples=20_000, seed=1)
    )
    n, p = stress.n_nodes, stress.ch_probability
    post_se = rec.post.std(ddof=1) / math.sqrt(rec.iterations)
    assert abs(rec.post.mean() - ev.terms.l3) <= 4 * math.hypot(post_se, ev.std_error * ev.terms.n_espa)

    # pre-disruption successes averaged over the binomial CH count
    pre = sum(
        math.comb(n, m) * p**m * (1 - p) ** (n - m) * ((n - m) * (1 - ev.p_fnch_by_ch[m]) + m * ev.terms.p_sch)
        for m in range(n + 1)
    )
    pre_se = rec.pre.std(ddof=1) / math.sqrt(rec.iterations)
    mc_se = math.sqrt(sum((math.comb(n, m) * p**m * (1 - p) ** (n - m) * (n - m) * se) ** 2
                          for m, se in enumerate(ev.p_fnch_se_by_ch)))
    assert abs(rec.pre.mean() - pre) <= 4 * math.hypot(pre_se, mc_se)


def test_breakdown_consistent_with_robustness(stress):
    rec = simulate(stress, iterations=1000, master_seed=2)
    bd = breakdown_from_record(rec)
    assert bd.pct_failing_nodes == pytest.approx(100 * (1 - robustness_from_record(rec).mean))
    assert 0 <= bd.pct_failing_chs <= 100


def test_degree_ratio_in_unit_interval(stress):
    est = simulator.degree_ratio_from_record(simulate(stress, iterations=500, master_seed=2))
    assert 0 < est.mean < 1


def test_no_success_baseline():
    cfg = default_config().with_nodes(10).with_(p_threshold_dbm=200.0)
    with pytest.raises(NoSuccessBaseline):
        simulator.estimate_robustness(cfg, iterations=100)


def test_iteration_floor():
    with pytest.raises(InvalidParameter):
        simulate(default_config(), UniformCount(), iterations=10)
