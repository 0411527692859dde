import numpy as np
import pytest

from minimax_bid.values import MarginalValueCurve, ValueVector

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, text = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = "PASS" if rep.outcome == "passed" else "FAIL"
        prev = _CRITERIA.get(number)
        if prev is None or prev[0] == "PASS":
            _CRITERIA[number] = (status, text)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, text = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {text}")


def random_curve(rng: np.random.Generator, max_segments: int = 4, Q: float = 1.0,
                 low: float = 0.05) -> MarginalValueCurve:
    k = int(rng.integers(1, max_segments + 1))
    cuts = np.sort(rng.uniform(0.05, 0.95, size=k - 1)) * Q
    bps = list(cuts) + [Q]
    # keep segments from getting vanishingly thin
    for i in range(1, len(bps)):
        bps[i] = max(bps[i], bps[i - 1] + 0.02 * Q)
    bps = [min(b, Q) for b in bps]
    bps = sorted(set(bps))
    lv = np.sort(rng.uniform(low, 1.0, size=len(bps)))[::-1]
    return MarginalValueCurve(tuple(bps), tuple(lv))


def random_values(rng: np.random.Generator, M: int, low: float = 0.05) -> ValueVector:
    return ValueVector(tuple(np.sort(rng.uniform(low, 1.0, size=M))[::-1]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
