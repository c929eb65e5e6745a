"""One test per acceptance criterion; each prints its pass/fail line."""

import pytest

from omstat.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("cid", [c[0] for c in CRITERIA], ids=[f"criterion_{c[0]:02d}" for c in CRITERIA])
def test_criterion(cid, capsys):
    r = run_criterion(cid)
    with capsys.disabled():
        print("\n" + r.line())
    assert r.measured <= r.threshold, r.detail
    assert r.runtime <= r.budget, f"runtime {r.runtime:.2f}s over {r.budget}s"
