from __future__ import annotations

import numpy as np
import pytest

from weylkit.shipped import CATALOG, free_schrodinger, third_order_halfline
from weylkit.weyl import WeylContext


@pytest.fixture(scope="session")
def contexts() -> dict[str, WeylContext]:
    return {name: make().context() for name, make in CATALOG.items()}


@pytest.fixture(scope="session")
def flagship_ctx() -> WeylContext:
    # tighter mode filter for evaluation close to the real axis
    p = third_order_halfline()
    return WeylContext.build(p.sys, p.U, mode_tol=1e-12)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def free_ctx() -> WeylContext:
    p = free_schrodinger()
    return WeylContext.build(p.sys, p.U, mode_tol=1e-12)


# --- acceptance report -------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title, budget): acceptance criterion with runtime budget in s")
    config.stash[_ACCEPTANCE] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and rep.when == "call":
        number, title, budget = mark.args
        ok = rep.passed and rep.duration < budget
        metrics = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in item.user_properties)
        item.config.stash[_ACCEPTANCE].append((number, title, ok, rep.duration, budget, metrics))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = sorted(config.stash.get(_ACCEPTANCE, []))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, dur, budget, metrics in rows:
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number} {verdict} {title} [{dur:.1f}s / {budget:.0f}s] {metrics}")
