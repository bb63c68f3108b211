import functools
import time

import numpy as np
import pytest

from sepscat.forward_scattering import scattering_S
from sepscat.transforms import SeparablePotential, band_bump, exp_decay, make_grid, transform_set

SUITE_BUDGET = 300.0     # seconds for the whole test session
_T0 = time.perf_counter()
ACCEPTANCE = []          # (criterion, passed, detail) from test_acceptance.py


@functools.lru_cache(maxsize=None)
def grid50():
    return make_grid(50.0, 2000)


@functools.lru_cache(maxsize=None)
def exp_case(alpha, a=1.0):
    pot = SeparablePotential([(alpha, exp_decay(a))])
    ts = transform_set(pot, grid50())
    return pot, ts, scattering_S(ts, pot)


@functools.lru_cache(maxsize=None)
def bumps_case(a1=0.5, a2=-0.8):
    pot = SeparablePotential([(a1, band_bump(0.5, 1.5)), (a2, band_bump(2.5, 3.5))])
    ts = transform_set(pot, grid50())
    return pot, ts, scattering_S(ts, pot)


def exact_B(alpha, lam):
    """Boundary value 1 + α/(1 − iλ)² of the rank-one exp channel."""
    return 1 + alpha / (1 - 1j * np.asarray(lam)) ** 2


def exact_Wsq(lam):
    lam = np.asarray(lam)
    return 8 * lam ** 2 / (1 + lam ** 2) ** 2


@pytest.fixture(scope="session")
def grid():
    return grid50()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - _T0
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        tr.write_line(f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    ok = elapsed <= SUITE_BUDGET
    tr.write_line(f"criterion 12 (wall time): {'PASS' if ok else 'FAIL'}  "
                  f"session {elapsed:.1f} s (budget {SUITE_BUDGET:.0f} s)")
