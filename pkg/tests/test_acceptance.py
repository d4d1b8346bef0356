"""Acceptance criteria: one PASS/FAIL line per criterion with its tolerance."""
import pytest

from sectorcalc.acceptance import CRITERIA


@pytest.mark.slow
@pytest.mark.parametrize("fn", CRITERIA, ids=[f"criterion_{i:02d}" for i in range(1, len(CRITERIA) + 1)])
def test_criterion(fn, capsys):
    c = fn()
    with capsys.disabled():
        print("\n" + c.line())
    assert c.passed, c.details
