"""Acceptance gate: every criterion at full resolution and stated tolerance.

Run with -s to see the one-line pass/fail report per criterion; the same
battery backs the `blowlab verify` subcommand.
"""

import pytest

from blowlab.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("cid,name", [(cid, name) for cid, name, _ in CRITERIA])
def test_criterion(cid, name, capsys):
    result = run_criterion(cid, quick=False)
    line = f"{cid} {name}: {'PASS' if result.passed else 'FAIL'} ({result.elapsed:.1f}s)"
    with capsys.disabled():
        print(f"\n{line}")
    assert result.passed, f"{line}\n{result.details}"
