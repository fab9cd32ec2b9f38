import pytest

_CHECKS = {}


def _record(criterion, name, ok, detail=""):
    """Store one sub-check of an acceptance criterion and echo it."""
    _CHECKS.setdefault(criterion, []).append((name, bool(ok), detail))
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok


@pytest.fixture
def acceptance():
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CHECKS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_CHECKS):
        checks = _CHECKS[crit]
        ok = all(c[1] for c in checks)
        failed = [c[0] for c in checks if not c[1]]
        tail = "" if ok else "  (failed: " + ", ".join(failed) + ")"
        tr.write_line(f"criterion {crit:>2}: {'PASS' if ok else 'FAIL'}  "
                      f"[{sum(c[1] for c in checks)}/{len(checks)} checks]{tail}")
        for name, good, detail in checks:
            tr.write_line(f"    {'ok  ' if good else 'FAIL'} {name}: {detail}")
