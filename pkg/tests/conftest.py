import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_CRITERIA: list[str] = []


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str):
        _CRITERIA.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
        print(_CRITERIA[-1])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
