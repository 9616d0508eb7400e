import numpy as np
import pytest

from ocbsparse import generate_instance

_CRITERIA = {}


@pytest.fixture
def inst_factory():
    def make(M=20, alpha=0.5, sigma_y2=1.0, seed=0):
        return generate_instance(M, alpha, sigma_y2, seed)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.passed:
        status = "PASS"
    elif rep.skipped:
        status = "SKIP"
    else:
        status = "FAIL"
        if not detail and call.excinfo is not None:
            detail = f"{call.excinfo.typename}: {str(call.excinfo.value).splitlines()[0][:160]}"
    _CRITERIA[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}  {title}: {detail}")
