"""Shared pytest wiring: the acceptance summary block printed after the run."""

import re

# test_acceptance appends free-form report lines here (e.g. measured sigmas)
ACCEPTANCE_NOTES: list = []

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = {}
    for status, ok in (("passed", True), ("failed", False),
                       ("error", False), ("skipped", False)):
        for report in terminalreporter.stats.get(status, []):
            match = _CRITERION.search(getattr(report, "nodeid", ""))
            if not match:
                continue
            key = (int(match.group(1)), match.group(2))
            if not ok:
                results[key] = False
            else:
                results.setdefault(key, True)
    if not results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num, name in sorted(results):
        verdict = "PASS" if results[(num, name)] else "FAIL"
        terminalreporter.write_line(
            f"ACCEPTANCE {num:02d} {name.replace('_', '-')}: {verdict}")
    for note in ACCEPTANCE_NOTES:
        terminalreporter.write_line(note)
