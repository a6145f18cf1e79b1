import math

import pytest
from hypothesis import given, strategies as st

from mtcrobust.model import (
    BernoulliPerNode,
    FixedCount,
    InvalidParameter,
    LinearPowers,
    NetworkConfig,
    RobustnessEstimate,
    UniformCount,
    binom_pmf,
    dbm_to_linear,
    default_config,
    floor_count,
    format_config,
    grid_half_width_from_density,
    linear_to_dbm,
    load_config,
    parse_config_text,
    validate,
)


def test_dbm_reference_values():
    assert dbm_to_linear(0.0) == 1.0
    assert dbm_to_linear(30.0) == pytest.approx(1000.0, rel=1e-15)
    assert dbm_to_linear(23.0) == pytest.approx(199.52623149688796, rel=1e-14)
    assert dbm_to_linear(-111.0) == pytest.approx(7.943282347242815e-12, rel=1e-14)


@given(st.floats(-400, 100))
def test_dbm_round_trip(level):
    assert linear_to_dbm(dbm_to_linear(level)) == pytest.approx(level, abs=1e-9)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_dbm_rejects_non_finite(bad):
    with pytest.raises(InvalidParameter):
        dbm_to_linear(bad)


def test_half_width_reference():
    # 150 nodes at unit density fill a square of side sqrt(150)
    assert grid_half_width_from_density(150, 1.0) == pytest.approx(math.sqrt(150) / 2, rel=1e-15)


@given(st.integers(1, 10_000), st.floats(1e-3, 1e3))
def test_density_half_width_inverse(n, density):
    a = grid_half_width_from_density(n, density)
    assert n / (2 * a) ** 2 == pytest.approx(density, rel=1e-12)


def test_floor_count_tolerates_float_noise():
    assert 100 * 0.29 < 29
    assert floor_count(100 * 0.29) == 29
    assert floor_count(150 * 0.3) == 45
    assert floor_count(150 * 0.1) == 15
    assert floor_count(4.999) == 4


def test_default_config_values():
    cfg = default_config()
    assert cfg.n_nodes == 150
    assert (cfg.p_tx_node_dbm, cfg.p_tx_bs_dbm, cfg.p_threshold_dbm) == (23.0, 46.0, -111.0)
    assert cfg.node_density == 1.0
    assert cfg.path_loss_exponent == 3.0
    assert cfg.half_width == pytest.approx(math.sqrt(150) / 2)


def test_validate_fills_both_geometry_fields():
    cfg = validate(NetworkConfig(n_nodes=100, ch_probability=0.2, grid_half_width=5.0))
    assert cfg.node_density == pytest.approx(1.0)


@pytest.mark.parametrize(
    "changes, field",
    [
        (dict(n_nodes=0), "n_nodes"),
        (dict(ch_probability=1.5), "ch_probability"),
        (dict(ch_probability=-0.1), "ch_probability"),
        (dict(path_loss_exponent=-1.0), "path_loss_exponent"),
        (dict(path_loss_exponent=math.nan), "path_loss_exponent"),
        (dict(p_threshold_dbm=math.inf), "p_threshold_dbm"),
        (dict(grid_half_width=3.0), "grid_half_width"),
        (dict(node_density=0.0), "node_density"),
    ],
)
def test_validate_rejects(changes, field):
    base = dict(n_nodes=100, ch_probability=0.1, node_density=1.0)
    base.update(changes)
    with pytest.raises(InvalidParameter) as info:
        validate(NetworkConfig(**base))
    assert info.value.field == field


def test_missing_geometry_rejected():
    with pytest.raises(InvalidParameter):
        validate(NetworkConfig(n_nodes=10, ch_probability=0.1))


def test_linear_powers_reject_negative():
    with pytest.raises(InvalidParameter):
        LinearPowers(p_t=-1.0, p_b=1.0, p_th=1.0)
    LinearPowers(p_t=1.0, p_b=1.0, p_th=0.0)


def test_with_nodes_keeps_density():
    cfg = default_config().with_nodes(50)
    assert cfg.node_density == 1.0
    assert cfg.half_width == pytest.approx(math.sqrt(50) / 2)


def test_config_text_round_trip(tmp_path):
    cfg = default_config().with_(ch_probability=0.3, p_threshold_dbm=-141.0)
    assert parse_config_text(format_config(cfg)) == cfg
    path = tmp_path / "s.cfg"
    path.write_text(format_config(cfg))
    assert load_config(str(path)) == cfg


def test_config_env_var(tmp_path, monkeypatch):
    path = tmp_path / "env.cfg"
    path.write_text("n_nodes = 20  # small\nch_probability = 0.5\nnode_density = 2\n")
    monkeypatch.setenv("MTCROBUST_CONFIG", str(path))
    cfg = load_config()
    assert (cfg.n_nodes, cfg.ch_probability, cfg.node_density) == (20, 0.5, 2.0)


@pytest.mark.parametrize(
    "text, field",
    [
        ("n_nodes = 10\n", "ch_probability"),
        ("n_nodes = ten\nch_probability = 0.1\nnode_density = 1\n", "n_nodes"),
        ("n_nodes = 10\nch_probability = 0.1\nnode_density = 1\ncolour = red\n", "colour"),
    ],
)
def test_config_parse_errors(text, field):
    with pytest.raises(InvalidParameter) as info:
        parse_config_text(text)
    assert info.value.field == field


def test_binom_reference():
    assert binom_pmf(1, 3, 0.5) == pytest.approx(0.375, rel=1e-14)
    assert binom_pmf(0, 5, 0.0) == 1.0
    assert binom_pmf(5, 5, 1.0) == 1.0


@given(st.integers(1, 500), st.floats(0.0, 1.0))
def test_binom_normalized(n, p):
    assert math.fsum(binom_pmf(m, n, p) for m in range(n + 1)) == pytest.approx(1.0, abs=1e-10)


@given(st.integers(1, 200), st.floats(0.0, 1.0), st.integers(0, 200))
def test_policy_pmfs_normalized(n, q, k):
    for policy in (UniformCount(), BernoulliPerNode(q), FixedCount(min(k, n))):
        pmf = policy.k_pmf(n)
        assert len(pmf) == n + 1
        assert math.fsum(pmf) == pytest.approx(1.0, abs=1e-10)
    assert UniformCount().k_pmf(n)[0] == 0.0


def test_policy_validation():
    with pytest.raises(InvalidParameter):
        BernoulliPerNode(1.2)
    with pytest.raises(InvalidParameter):
        FixedCount(5).k_pmf(3)


def test_estimate_requires_mean_inside_ci():
    with pytest.raises(ValueError):
        RobustnessEstimate(0.5, 0.01, (0.6, 0.7), 10, "sim", {})
