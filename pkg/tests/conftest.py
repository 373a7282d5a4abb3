import numpy as np
import pytest

from fsdiffusion import Parameters

# (theta, kappa, alpha, beta) used throughout the Monte Carlo tests
REFERENCE = Parameters(theta=1.0, kappa=2.0, alpha=6.0, beta=10.0)


@pytest.fixture
def ref():
    return REFERENCE


def random_parameters(rng, n, beta_min=4.5):
    out = []
    for _ in range(n):
        out.append(Parameters(theta=rng.uniform(0.1, 5.0), kappa=rng.uniform(0.1, 10.0),
                              alpha=rng.uniform(2.5, 30.0), beta=rng.uniform(beta_min, 30.0)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)


# acceptance results, printed as one line per criterion at the end of the run
ACCEPTANCE = {}


def record_criterion(number, title, passed, detail, seconds):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} ({detail}; {seconds:.1f} s)"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
