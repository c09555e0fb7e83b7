import numpy as np
import pytest

from rsbounds import ensemble as ens
from rsbounds.kronig_penney import KronigPenneyScatterer
from rsbounds.potential import gaussian_truncated, smooth_bump, square


@pytest.fixture(scope="session")
def kp():
    return KronigPenneyScatterer()


@pytest.fixture(scope="session")
def pm1():
    """Couplings +1 and -1 with equal probability."""
    return ens.bernoulli(1.0, -1.0)


@pytest.fixture(scope="session")
def shapes():
    return {"square": square(), "narrow": square(0.25, 2.0), "gauss": gaussian_truncated(),
            "bump": smooth_bump(), "offset": gaussian_truncated(0.08, 0.2)}


def rng(seed=0):
    return np.random.default_rng(seed)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance(request):
    """Record one summary line per acceptance criterion."""
    def record(number, passed, detail):
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed
    return record


def pytest_runtest_makereport(item, call):
    # a criterion that raised before recording still gets a FAIL line
    number = getattr(item.function, "criterion", None)
    if number is not None and call.when == "call" and call.excinfo is not None:
        line = ACCEPTANCE_LINES.get(number, f"criterion {number:2d}: FAIL  {call.excinfo.typename}")
        ACCEPTANCE_LINES[number] = line.replace(": PASS", ": FAIL")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
