import pytest

#: (criterion number, passed, detail) recorded by the acceptance tests
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE, key=lambda r: (r[0], not r[1])):
        label = "PASS" if passed is True else "FAIL" if passed is False else "INFO"
        terminalreporter.write_line(f"criterion {number}: {label}  {detail}")


@pytest.fixture
def record():
    def _record(number, passed, detail):
        line = (number, passed, detail)
        ACCEPTANCE.append(line)
        label = "PASS" if passed is True else "FAIL" if passed is False else "INFO"
        print(f"criterion {number}: {label}  {detail}")

    return _record
