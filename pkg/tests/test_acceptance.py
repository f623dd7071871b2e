"""The twelve numbered acceptance criteria at their stated tolerances.

Each criterion prints one PASS/FAIL line; the lines are repeated in the
terminal summary.  Run directly with ``python tests/test_acceptance.py`` for
the lines alone.
"""

import sys

import pytest

from elliptic_gas.validation import ACCEPTANCE, run_check

RESULTS = {}


@pytest.mark.slow
@pytest.mark.parametrize("number,check", ACCEPTANCE, ids=[f"criterion_{n:02d}_{c.__name__[6:]}" for n, c in ACCEPTANCE])
def test_criterion(number, check):
    res = run_check(check, "full")
    line = f"criterion {number:2d}: {res.line()}"
    RESULTS[number] = line
    print(line)
    assert res.passed, line


if __name__ == "__main__":
    failed = 0
    for number, check in ACCEPTANCE:
        res = run_check(check, "full")
        print(f"criterion {number:2d}: {res.line()}", flush=True)
        failed += not res.passed
    sys.exit(1 if failed else 0)
