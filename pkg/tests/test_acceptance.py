"""The thirteen acceptance criteria, one test each (criterion 11 has two parts).

Every test prints its ``[PASS]``/``[FAIL]`` line straight to the terminal,
so the lines appear even when pytest captures output.
"""

import pytest

from ddlab import acceptance

KEYS = list(acceptance.CRITERIA)


@pytest.mark.parametrize("key", KEYS, ids=[f"criterion_{k}" for k in KEYS])
def test_criterion(key, capsys):
    res = acceptance.CRITERIA[key]()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.detail
    assert res.in_budget, f"took {res.seconds:.1f}s, budget {res.budget:g}s"
