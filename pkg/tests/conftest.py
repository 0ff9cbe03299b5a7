import numpy as np
import pytest

from qscore.rng import SeededRng


@pytest.fixture
def rng():
    return SeededRng(20240611).generator()


def herm(d, g, scale=1.0):
    m = g.normal(size=(d, d)) + 1j * g.normal(size=(d, d))
    return scale * 0.5 * (m + m.conj().T)


def full_rank_state(d, g, floor=0.05):
    """Random state with every eigenvalue >= floor (well-conditioned for log)."""
    w = g.dirichlet(np.ones(d)) * (1 - d * floor) + floor
    q, _ = np.linalg.qr(g.normal(size=(d, d)) + 1j * g.normal(size=(d, d)))
    return (q * w) @ q.conj().T


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
