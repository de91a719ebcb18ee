import pytest

from nvopt.harness import split_for
from nvopt.model import build_interaction_model


@pytest.fixture(scope="session")
def nv10():
    return build_interaction_model()


@pytest.fixture(scope="session")
def nv10_split(nv10):
    return split_for(nv10)


@pytest.fixture(scope="session")
def nv4():
    return build_interaction_model(dims=4)


@pytest.fixture(scope="session")
def lambda3():
    return build_interaction_model(dims=3, dissipation=False)


# one PASS/FAIL line per acceptance criterion at the end of the run
_CRITERIA: dict[int, list[tuple[str, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _CRITERIA.setdefault(mark.args[0], []).append((report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _CRITERIA[n]
        ok = all(o == "passed" for o, _ in results)
        details = " | ".join(d for _, d in results if d)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {details}")
