import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

# Dense single-site matrices: an oracle independent of the symplectic code.
PAULI = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def dense_label(label: str) -> np.ndarray:
    """Kronecker product with the leftmost character as the first factor."""
    out = np.array([[1.0 + 0j]])
    for ch in label:
        out = np.kron(out, PAULI[ch])
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------- acceptance report

_ACCEPTANCE = {}


class _Recorder:
    def __call__(self, number: int, passed: bool, detail: str) -> None:
        prev = _ACCEPTANCE.get(number)
        if prev is None:
            _ACCEPTANCE[number] = (bool(passed), [detail])
        else:
            _ACCEPTANCE[number] = (prev[0] and bool(passed), prev[1] + [detail])


@pytest.fixture
def acceptance():
    """Record the outcome of an acceptance criterion for the summary table."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in range(1, 11):
        if number not in _ACCEPTANCE:
            tr.write_line(f"criterion {number:2d}: NOT RUN")
            continue
        passed, details = _ACCEPTANCE[number]
        tr.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} | "
                      + "; ".join(details))
