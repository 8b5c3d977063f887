import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(tag, title): acceptance criterion reported in the summary")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    tag, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    prev = item.config._criteria.get(tag)
    ok = rep.passed and (prev is None or prev[0])
    item.config._criteria[tag] = (ok, title, detail or (prev[2] if prev else ""))


def pytest_terminal_summary(terminalreporter, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(crit):
        ok, title, detail = crit[tag]
        line = f"{'PASS' if ok else 'FAIL'} {tag} {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)
