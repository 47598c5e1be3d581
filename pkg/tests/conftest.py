import numpy as np
import pytest

from lrpr.rng import RngSpec, complex_normal


@pytest.fixture
def gen():
    return RngSpec(12345).generator()


def unit(v):
    return v / np.linalg.norm(v)


def random_rank1(gen, d1, d2):
    u = unit(complex_normal(gen, (d1,)))
    v = unit(complex_normal(gen, (d2,)))
    return u, v, np.outer(u, v.conj())


# pass/fail lines from the acceptance suite, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
