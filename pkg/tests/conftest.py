import pytest

from uslang import samples
from uslang.alg import RealizeInput
from uslang.parse import parse_pipeline, parse_schedule


@pytest.fixture
def blur():
    return parse_pipeline(samples.BLUR)


@pytest.fixture
def window6():
    return RealizeInput((), ((0, 6),))


@pytest.fixture
def schedules():
    return {k: parse_schedule(v) for k, v in samples.SCHEDULES.items()}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
