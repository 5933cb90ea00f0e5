import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance(capsys):
    """Record one PASS/FAIL line per acceptance criterion and echo it live."""

    def record(key, passed: bool, detail: str, seconds: float):
        line = f"ACCEPTANCE {key:<14} {'PASS' if passed else 'FAIL'}  {detail}  [{seconds:.2f} s]"
        _ACCEPTANCE[key] = line
        with capsys.disabled():
            print("\n" + line)
        return passed

    return record


def _sort_key(key):
    head, _, tail = str(key).partition(" ")
    return (int(head), tail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=_sort_key):
        terminalreporter.write_line(_ACCEPTANCE[key])
