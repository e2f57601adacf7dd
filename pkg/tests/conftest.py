import numpy as np
import pytest

from bergstat import Domain

ACCEPTANCE_LINES = []

DOMAINS = [Domain.disc(), Domain.polydisc(2), Domain.ball(2)]


@pytest.fixture(params=DOMAINS, ids=str)
def domain(request):
    return request.param


def random_points(domain, count, radius, seed):
    """Points of the domain scaled by ``radius`` (for interior test points)."""
    from bergstat.domains import uniform_box_sample
    return radius * uniform_box_sample(domain, seed, count)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
