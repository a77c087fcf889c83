"""Shared fixtures and the acceptance summary printed after the run."""

import os

import numpy as np
import pytest

from randzs.signal import make_grid, make_rng

ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


@pytest.fixture
def record_acceptance():
    """Store ``(passed, detail)`` for one criterion under its number."""

    def _record(number, passed, detail):
        ACCEPTANCE[int(number)] = (bool(passed), str(detail))
        line = f"ACCEPTANCE {int(number):2d} {'PASS' if passed else 'FAIL'}: {detail}"
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    n_ok = sum(ok for ok, _ in ACCEPTANCE.values())
    terminalreporter.write_line(f"{n_ok}/{len(ACCEPTANCE)} criteria passed")


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def small_grid():
    return make_grid(20.0, 0.1)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    """Temporary working directory with no ``RANDZS_`` variables set."""
    for k in list(os.environ):
        if k.startswith("RANDZS_"):
            monkeypatch.delenv(k)
    monkeypatch.chdir(tmp_path)
    return tmp_path

