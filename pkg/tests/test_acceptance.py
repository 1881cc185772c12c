"""Acceptance criteria at their stated tolerances; one summary line each."""

from __future__ import annotations

import pytest

from mfbm_lan.acceptance import CRITERIA, ModelCache

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


@pytest.fixture(scope="module")
def cache():
    return ModelCache()


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, cache, report_lines):
    res = CRITERIA[number](cache)
    lines = res.lines()
    print("\n".join(lines))
    report_lines.extend(lines)
    assert res.passed, "\n".join(lines)
