"""Shared test configuration.

The acceptance tests register one human-readable verdict line per
criterion; the hook below prints them in the terminal summary so the
pass/fail lines are visible regardless of output capturing.
"""

ACCEPTANCE_LINES: list[str] = []


def record_verdict(ok: bool, label: str, detail: str) -> None:
    word = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"[{word}] {label}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
