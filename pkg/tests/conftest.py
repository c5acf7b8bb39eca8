import numpy as np
import pytest

from median_meta import distributions as dist
from median_meta.summary_model import GroupSummary, load_tb_fixture


def exact_group(family, params, scenario, n=100):
    """GroupSummary whose quantiles are the family's exact theoretical ones."""
    q = lambda p: float(dist.quantile(family, params, p))  # noqa: E731
    if scenario == "s1":
        return GroupSummary(n, min=q(1 / n), median=q(0.5), max=q(1 - 1 / n))
    if scenario == "s2":
        return GroupSummary(n, q1=q(0.25), median=q(0.5), q3=q(0.75))
    return GroupSummary(n, min=q(1 / n), q1=q(0.25), median=q(0.5), q3=q(0.75), max=q(1 - 1 / n))


@pytest.fixture(scope="session")
def tb():
    return load_tb_fixture()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
