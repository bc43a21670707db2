import numpy as np
import pytest

from kahlerflow import flow
from kahlerflow.profile import Mode, ProfileParams, build_profile

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def default_profile():
    return build_profile(ProfileParams())


@pytest.fixture(scope="session")
def knopf_profile():
    return build_profile(ProfileParams(), mode=Mode.KNOPF_CONSTANT)


@pytest.fixture(scope="session")
def default_run(default_profile):
    """Defaults evolved to t = 1e-3 on m = 4096, with two earlier snapshots."""
    config = flow.SolverConfig(snapshot_times=(0.0, 2.5e-4, 5e-4))
    state = flow.init_state(default_profile, config)
    return config, flow.evolve(state, config)


def random_points(rng, n, count, r_range):
    """Points of C^n with r uniform in r_range and uniformly random direction."""
    points = []
    for _ in range(count):
        u = rng.normal(size=n) + 1j * rng.normal(size=n)
        u /= np.linalg.norm(u)
        r = rng.uniform(*r_range)
        points.append(np.exp(r / 2) * u)
    return points


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
