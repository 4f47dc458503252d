import numpy as np
import pytest
from scipy.stats import ortho_group, special_ortho_group

from orthomult.moduli import GrandPoint, grand_construct


def rand_orth(k, seed, special=False):
    if k == 1:
        return np.eye(1)
    gen = special_ortho_group if special else ortho_group
    return gen.rvs(k, random_state=seed)


def naive_residual(F):
    """Loop-based Hurwitz residual, kept independent of the vectorized one."""
    m = len(F)
    worst = 0.0
    for a in range(m):
        for b in range(m):
            target = 2.0 * np.eye(F[a].shape[0]) if a == b else 0.0
            worst = max(worst, np.abs(F[a] @ F[b].T + F[b] @ F[a].T - target).max())
    return worst


@pytest.fixture
def grand_basic():
    return grand_construct(GrandPoint(0.3, 0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
