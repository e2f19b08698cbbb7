import functools

import numpy as np
import pytest

from qastab.circuit import build_iqft, build_qft
from qastab.correlate import chi_sum, correlator_gue

BUILDERS = {'qft': build_qft, 'iqft': build_iqft}


@functools.lru_cache(maxsize=None)
def gue_chi(algo: str, n: int) -> float:
    """chi from the GUE-averaged correlator, memoized across the session."""
    return chi_sum(correlator_gue(BUILDERS[algo](n))).chi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unitary(gen, dim):
    z = gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    def _report(number, title, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
        assert ok, f'criterion {number} ({title}) failed: {detail}'
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section('acceptance criteria')
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
