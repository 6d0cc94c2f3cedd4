import os

import numpy as np
import pytest

from stencilforge.interpreter import evaluate

_RESULTS = {}


def pytest_runtest_makereport(item, call):
    number = item.get_closest_marker("criterion")
    if number is None or call.when not in ("setup", "call"):
        return
    n = number.args[0]
    failed = call.excinfo is not None and not call.excinfo.errisinstance(
        pytest.skip.Exception)
    if call.when == "setup" and not failed:
        return
    _RESULTS[n] = _RESULTS.get(n, True) and not failed


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion n")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        verdict = "PASS" if _RESULTS[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}")


class Env:
    """Random numeric values for symbols and grid accesses."""

    def __init__(self, seed=0, scalars=None):
        self.rng = np.random.default_rng(seed)
        self.values = {}
        self.scalars = dict(scalars or {})

    def load(self, acc):
        if acc not in self.values:
            self.values[acc] = self.rng.uniform(-2.0, 2.0)
        return self.values[acc]

    def scalar(self, name):
        if name not in self.scalars:
            self.scalars[name] = self.rng.uniform(0.5, 2.0)
        return self.scalars[name]

    def __call__(self, e, temps=None):
        return evaluate(e, self.load, self.scalar, temps)


@pytest.fixture
def env():
    return Env


def gcc_smoke_enabled():
    return os.environ.get("STENCILFORGE_CC_SMOKE", "") not in ("", "0")
