from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import criteria  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not criteria.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(criteria.RESULTS):
        terminalreporter.write_line(criteria.RESULTS[n])
