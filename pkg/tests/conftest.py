import numpy as np
import pytest

from qpuff.core import basis_state, random_state

RHO_DIAG = np.diag([0.75, 0.25]).astype(complex)
SIGMA_DIAG = np.diag([0.5, 0.5]).astype(complex)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def diag_pair():
    return RHO_DIAG.copy(), SIGMA_DIAG.copy()


@pytest.fixture
def orthogonal_qubits():
    return basis_state(2, 0), basis_state(2, 1)


def random_pairs(n, d, seed=0):
    rng = np.random.default_rng(seed)
    return [(random_state(d, seed=rng), random_state(d, seed=rng)) for _ in range(n)]


_CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""
    def record(n, ok, detail=""):
        _CRITERIA[n] = f"CRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
