import numpy as np
import pytest

from obfuskit.designer import feasibility
from obfuskit.instances import independent_bits, random_joint, random_sizes


def feasible_suite(seed, count, max_us=3, max_x=5):
    """Random feasible Dirichlet(1) instances, drawn in a fixed order."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        j = random_joint(rng, *random_sizes(rng, max_us, max_x))
        if feasibility(j).feasible:
            out.append(j)
    return out


def random_interior(rng, n):
    return rng.dirichlet(np.ones(n))


def random_direction(rng, p):
    """Unit vector orthogonal to sqrt(p), from a projected Gaussian."""
    s = np.sqrt(p)
    k = rng.standard_normal(p.size)
    k -= (k @ s) * s
    return k / np.linalg.norm(k)


@pytest.fixture
def bits():
    return independent_bits()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.VERDICTS):
            terminalreporter.write_line(test_acceptance.VERDICTS[n])
