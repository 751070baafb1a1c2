import time

import numpy as np
import pytest

from octolift.config import default_config
from octolift.harness import run_experiment
from octolift.multibody import LoadParams, VehicleParams


@pytest.fixture(scope="session")
def veh():
    return VehicleParams()


@pytest.fixture(scope="session")
def load():
    return LoadParams(100.0, 0.5)


@pytest.fixture(scope="session")
def scenario():
    """The default seeded scenario: ``(config, log, metrics, seconds)``."""
    cfg = default_config()
    t0 = time.perf_counter()
    traj, metrics = run_experiment(cfg)
    return cfg, traj, metrics, time.perf_counter() - t0


def random_states(rng, n, tilt=1.2):
    """Batch of (q, qdot, m_L, r_L) away from the pitch singularity."""
    q = np.concatenate([rng.uniform(-10, 10, (n, 3)),
                        rng.uniform(-tilt, tilt, (n, 2)),
                        rng.uniform(-np.pi, np.pi, (n, 1))], axis=1)
    qdot = rng.normal(0.0, 1.0, (n, 6))
    return q, qdot, rng.uniform(0, 100, n), rng.uniform(0, 1.5, n)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
