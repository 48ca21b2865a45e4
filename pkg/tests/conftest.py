import sys
from pathlib import Path

import numpy as np
import pytest

from cyclicavail import kernels
from cyclicavail.core import CyclicMarkovModel, ObservationSequence

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"
KERNEL_NAMES = sorted(kernels.implementations())


@pytest.fixture(params=KERNEL_NAMES)
def kernel_impl(request, monkeypatch):
    """Run the test once per available kernel implementation."""
    impl = kernels.implementations()[request.param]
    for name in ("forward", "backward", "accumulate_transitions",
                 "gap_edge_fractions", "heuristic_accumulate"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


def make_model(trans, init=None):
    trans = np.asarray(trans, dtype=float)
    if trans.ndim == 2:
        trans = trans[None]
    p, n, _ = trans.shape
    if init is None:
        init = np.full((p, n), 1.0 / n)
    return CyclicMarkovModel(trans, init)


def seq(values, size=None, start=1, cluster_id="c"):
    values = np.asarray(values)
    if size is None:
        size = int(values.max()) if values.size else 0
    return ObservationSequence(values, start, size, cluster_id)


# acceptance reporting ---------------------------------------------------------

_ACCEPTANCE: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(id, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when not in ("setup", "call"):
        return
    cid, title = marker.args
    if rep.when == "setup" and rep.passed:
        return
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    details = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    _ACCEPTANCE[cid] = {"title": title, "status": status, "details": details}


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: int(c.lstrip("C"))):
        r = _ACCEPTANCE[cid]
        terminalreporter.write_line(f"{cid} {r['status']}: {r['title']}")
        if r["details"]:
            terminalreporter.write_line(f"    {r['details']}")
