import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the lines are echoed in the terminal summary."""
    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(_ACCEPTANCE[-1])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
