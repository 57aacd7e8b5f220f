"""The full acceptance battery at production sizes; one pass/fail line per criterion."""
import pytest

from msk.verify import CRITERIA

RESULTS = []


@pytest.mark.slow
@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{k:02d}" for k in range(1, len(CRITERIA) + 1)])
def test_criterion(check, capsys):
    result = check(False)
    RESULTS.append(result)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
