"""Per-criterion pass/fail lines for the acceptance suite."""
import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    props = dict(item.user_properties)
    verdict = props.get("verdict", "PASS" if rep.passed else "FAIL")
    detail = props.get("detail", "")
    # several tests may share a criterion: any FAIL wins, details are joined
    if mark.args[0] in _RESULTS:
        old, old_detail = _RESULTS[mark.args[0]]
        verdict = verdict if old.startswith("PASS") else old
        detail = "; ".join(filter(None, [old_detail, detail]))
    _RESULTS[mark.args[0]] = (verdict, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        verdict, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {detail}".rstrip())
