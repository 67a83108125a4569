from __future__ import annotations

import pytest

_ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


class CriterionRecorder:
    def __call__(self, number: int, title: str, passed: bool, detail: str) -> None:
        _ACCEPTANCE[number] = (bool(passed), title, detail)
        assert passed, f"criterion {number} ({title}) failed: {detail}"


@pytest.fixture
def criterion() -> CriterionRecorder:
    """Record an acceptance criterion outcome and assert on it."""
    return CriterionRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        passed, title, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}")
