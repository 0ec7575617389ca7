"""Collects one verdict line per acceptance criterion for the run summary."""

from __future__ import annotations

import pytest

_VERDICTS: dict[int, str] = {}


@pytest.fixture
def record():
    def _record(number: int, ok: bool, detail: str) -> bool:
        _VERDICTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_VERDICTS[number])
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[number])
