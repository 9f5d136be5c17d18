"""Acceptance criteria at their stated tolerances.

Each test prints one ``criterion N PASS|FAIL`` line; the lines are repeated in
the terminal summary.  Run directly (``python tests/test_acceptance.py``) to
print the table without pytest.
"""

import os

import pytest

from stoqwalk.suite import CRITERIA, run_criterion

SEED = int(os.environ.get("STOQWALK_SEED", "0"))
RESULTS = []


@pytest.mark.parametrize("cid", sorted(CRITERIA), ids=lambda c: f"criterion{c:02d}")
def test_criterion(cid):
    result = run_criterion(cid, seed=SEED)
    RESULTS.append(result.line())
    print(result.line())
    assert result.passed, result.detail


if __name__ == "__main__":
    for cid in sorted(CRITERIA):
        print(run_criterion(cid, seed=SEED).line(), flush=True)
