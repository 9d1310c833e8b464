import numpy as np
import pytest

from kinetax.model import ModelConfig, build_coefficients


@pytest.fixture(scope="session")
def default_coeffs():
    return build_coefficients(ModelConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one human-readable outcome line per acceptance criterion."""
    def record(number, ok, detail):
        ACCEPTANCE_LINES.append((number, ok, detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}")
