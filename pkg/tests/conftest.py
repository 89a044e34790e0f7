import numpy as np
import pytest

from dvcm.model import Dataset


def make_dataset(seed, n=6, p=2, q=2, s=1, d=2):
    rng = np.random.default_rng(seed)
    sizes = np.full(n, s) if np.isscalar(s) else np.asarray(s)
    rows = int(sizes.sum())
    return Dataset(rng.random((n, d)), rng.standard_normal(rows), rng.standard_normal((rows, p)), sizes, q=q)


@pytest.fixture
def small_data():
    return make_dataset(0)


# acceptance criteria: one pass/fail line each in the terminal summary
_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    _CRITERIA[number] = (title, report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        line = f"criterion {number} ({title}): {'PASS' if passed else 'FAIL'}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
