import numpy as np
import pytest

# criterion number -> (verdict, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        verdict, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"ACCEPTANCE {key:>2}: {verdict}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    """Record a criterion verdict for the terminal summary and return it."""

    def record(key: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[key] = ("PASS" if ok else "FAIL", detail)
        return ok

    return record
