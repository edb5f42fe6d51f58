import numpy as np
import pytest


def random_complex(n, m=None, seed=0):
    """Standard complex Gaussian matrix from a seeded numpy generator."""
    rng = np.random.default_rng(seed)
    m = n if m is None else m
    return (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)


def rel_close(a, b, rtol, scale=None):
    ref = max(abs(b), 1e-300) if scale is None else scale
    return abs(a - b) <= rtol * ref


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# One line per acceptance criterion, printed after the run.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
