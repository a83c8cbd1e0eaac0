import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_symplectic(rng, scale=1.0):
    """Product of exponentials of random sp_2(R) elements."""
    from sp2lyap.linalg import matrix_exp, sp2_from_coords

    A = np.eye(4)
    for _ in range(2):
        A = A @ matrix_exp(sp2_from_coords(scale * rng.standard_normal(10)))
    return A
