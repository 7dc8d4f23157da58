import acceptance_tasks


def pytest_terminal_summary(terminalreporter):
    if not acceptance_tasks.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_tasks.RESULTS):
        passed, detail = acceptance_tasks.RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
