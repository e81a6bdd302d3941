import numpy as np
import pytest

from stentropy.grid import bbox_around, build_grid
from stentropy.ingest import Trace
from stentropy.synth import synth_a


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write


@pytest.fixture(scope="session")
def grid2():
    """2x2 grid of 500 m cells."""
    return build_grid(bbox_around(46.5, 6.6, 1000, 1000), 500)


@pytest.fixture(scope="session")
def grid3():
    return build_grid(bbox_around(46.5, 6.6, 1500, 1500), 500)


def center(grid, i, j):
    return (grid.min_lat + (j + 0.5) * grid.lat_step, grid.min_lon + (i + 0.5) * grid.lon_step)


def make_trace(uid, fixes, grid):
    """Trace from ``(timestamp, (i, j))`` pairs placed at cell centers."""
    ts = [t for t, _ in fixes]
    pts = [center(grid, *c) for _, c in fixes]
    return Trace(uid, ts, [p[0] for p in pts], [p[1] for p in pts])


@pytest.fixture(scope="session")
def synth_a_small():
    """A lighter synth-A (40 users, 20 days) for integration tests."""
    return synth_a(seed=7, users_per_profile=20, days=20)


# acceptance criteria: test nodeid -> (criterion, outcome, detail)
ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): release acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        ACCEPTANCE[item.nodeid] = (marker.args[0], rep.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, detail in ACCEPTANCE.values():
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{detail}]" if detail else ""))
