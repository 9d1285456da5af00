import numpy as np
import pytest

from benign_kkt.data_gen import Dataset


def make_dataset(X, y, seed=0) -> Dataset:
    return Dataset.from_arrays(np.asarray(X, dtype=float), np.asarray(y), seed)


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def report(criterion, ok: bool, detail: str) -> bool:
    """Record one acceptance outcome line; printed again in the terminal summary."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
