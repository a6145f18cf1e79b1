import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mtcrobust.model import NetworkConfig, default_config, validate  # noqa: E402


@pytest.fixture
def default_scenario():
    return default_config()


@pytest.fixture
def stress():
    """Small network with frequent link failures (the default scenario is near-perfect)."""
    return validate(
        NetworkConfig(
            n_nodes=30,
            ch_probability=0.3,
            node_density=1.0,
            p_tx_node_dbm=40.0,
            p_tx_bs_dbm=46.0,
            p_threshold_dbm=28.0,
        )
    )


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    RESULTS = module.RESULTS
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        passed, line = RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}: {line}")
