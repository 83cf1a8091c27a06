import numpy as np
import pytest

from recruitsynth.graph import CausalGraphSpec, VariableSpec, default_graph


def cat(name, domain, **kw):
    return VariableSpec(name, "categorical", tuple(domain), **kw)


GENDER = cat("gender", ["male", "not_male"])
HOURS = cat("working_hours", ["full_time", "part_time"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def curriculum_graph():
    return default_graph("curriculum")


@pytest.fixture(scope="session")
def job_graph():
    return default_graph("job_offer")


@pytest.fixture
def gender_hours_graph():
    return CausalGraphSpec((GENDER, HOURS), (("gender", "working_hours"),))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"CRITERION {n:>2}: {'PASS' if ok else 'FAIL'} | {detail}")
