import numpy as np
import pytest

from nomapa.config import pathloss_gain
from nomapa.noma_rates import Scenario
from nomapa.pa_model import PaModel
from nomapa.units import dbm_to_watts

NDM = PaModel(0.0032, 1.3552)
BANDWIDTH = 30e6
NOISE = float(dbm_to_watts(-174.0)) * BANDWIDTH
P_MAX = float(dbm_to_watts(36.0))


def two_user_scenario(model: PaModel = NDM) -> Scenario:
    """Users at 120 m and 80 m, 2.4 GHz, exponent 2.6, antenna gain 4.11."""
    gains = pathloss_gain(np.array([120.0, 80.0]), 2.4e9, 2.6, 4.11)
    return Scenario.homogeneous(tuple(gains), model, NOISE, P_MAX, BANDWIDTH)


def random_scenario(rng: np.random.Generator, k: int, heterogeneous: bool = True) -> Scenario:
    """Path-loss users between 50 and 200 m with PA models around the measured regime."""
    sigma = rng.uniform(2.2, 3.0)
    gains = pathloss_gain(rng.uniform(50.0, 200.0, k), 2.4e9, sigma, 4.11)
    n = k if heterogeneous else 1
    models = [PaModel(rng.uniform(1e-3, 1e-2), rng.uniform(1.1, 1.6)) for _ in range(n)]
    if not heterogeneous:
        models = models * k
    p_max = float(dbm_to_watts(rng.uniform(30.0, 36.0)))
    return Scenario(tuple(gains), tuple(models), NOISE, p_max, BANDWIDTH)


@pytest.fixture
def paper_two_user() -> Scenario:
    return two_user_scenario()


# one PASS/FAIL line per acceptance criterion -----------------------------------

_ACCEPTANCE: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (report.when != "call" and not report.failed):
        return
    n, title = mark.args
    entry = _ACCEPTANCE.setdefault(n, {"title": title, "ok": True, "seconds": 0.0})
    entry["ok"] = entry["ok"] and report.passed
    entry["seconds"] += report.duration


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[n]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {e['title']} ({e['seconds']:.1f} s)")
