import time

import pytest
from hypothesis import HealthCheck, settings

from pricer.distribution import ValueDistribution, uniform_over
from pricer.solver import solve_enum, solve_optimal

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


_ACCEPTANCE: list[tuple[str, bool, str, float]] = []


@pytest.fixture(scope="session", autouse=True)
def warm_kernel():
    """Compile (or load cached) numba kernels, with the array types the solvers pass, before timing."""
    d = ValueDistribution([1.0, 2.0, 4.0], [0.3, 0.3, 0.4])
    for T in (0.0, 0.5):
        solve_enum(d, T)
        solve_optimal(d, T)
        solve_optimal(d, T, method="direct")
    yield


@pytest.fixture
def small3():
    return uniform_over([3.0, 4.0, 12.0])


@pytest.fixture
def three_hundred():
    return uniform_over([100.0, 101.0, 102.0])


@pytest.fixture
def merge_example():
    eps = 1e-4
    return ValueDistribution([100.0, 101.0, 102.0, 103.0],
                             [1 / 3 - eps, 1 / 3, eps, 1 / 3]), eps


class Recorder:
    def __init__(self, label):
        self.label = label
        self.t0 = time.perf_counter()

    def done(self, passed: bool, detail: str = "") -> bool:
        elapsed = time.perf_counter() - self.t0
        _ACCEPTANCE.append((self.label, bool(passed), detail, elapsed))
        return passed


@pytest.fixture
def acceptance(request):
    def start(label):
        return Recorder(label)
    return start


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail, elapsed in _ACCEPTANCE:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {label}  ({elapsed:.2f}s)  {detail}")
