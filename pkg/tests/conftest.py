import re

_CRITERION = re.compile(r"test_(A\d+)_")
_results: dict = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry = _results.setdefault(m.group(1), {"ok": True, "details": []})
        entry["ok"] = entry["ok"] and report.passed
        entry["details"] += [str(v) for k, v in report.user_properties if k == "detail"]
        if not report.passed:
            entry["details"].append(f"{report.nodeid.split('::')[-1]} {report.outcome}")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_results, key=lambda k: int(k[1:])):
        entry = _results[key]
        line = f"{key} {'PASS' if entry['ok'] else 'FAIL'}"
        if entry["details"]:
            line += "  " + "; ".join(entry["details"])
        terminalreporter.write_line(line)
