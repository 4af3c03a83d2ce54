import json
import math

import pytest
from hypothesis import given, strategies as st

from exitflow.report import Check, VerificationReport, make_check


def test_relations():
    assert make_check("a", 1.0, 1.0, "<=", 0.0, "t").passed
    assert make_check("a", 1.005, 1.0, "<=", 0.01, "t").passed
    assert not make_check("a", 1.02, 1.0, "<=", 0.01, "t").passed
    assert not make_check("a", 1.0, 1.0, "<", 0.0, "t").passed
    assert make_check("a", 0.975, 1.0, "~=", 0.03, "t").passed
    assert make_check("a", 0.02, 0.0, "~=", 0.03, "t").passed  # absolute at zero bound
    assert not make_check("a", math.nan, 1.0, "<=", 0.1, "t").passed
    with pytest.raises(ValueError):
        make_check("a", 1.0, 1.0, "!=", 0.0, "t")


def test_provenance_is_required():
    with pytest.raises(ValueError):
        Check("a", 1.0, 1.0, "<=", 0.0, True, "")


def test_duplicate_names_are_rejected():
    rep = VerificationReport("r")
    rep.add(make_check("a", 1.0, 2.0, "<=", 0.0, "t"))
    with pytest.raises(ValueError):
        rep.add(make_check("a", 1.0, 2.0, "<=", 0.0, "t"))


def test_json_is_stable_and_handles_infinity():
    rep = VerificationReport("r", [make_check("a", 1.0, math.inf, "<=", 0.0, "t")])
    d = json.loads(rep.to_json())
    assert d["passed"] is True
    assert d["checks"][0]["bound"] == "inf"
    assert rep.to_json() == rep.to_json()


@given(st.lists(st.booleans(), max_size=12))
def test_verdict_is_the_conjunction(flags):
    rep = VerificationReport("r")
    for k, ok in enumerate(flags):
        rep.add(make_check(f"c{k}", 0.0 if ok else 2.0, 1.0, "<=", 0.0, "t"))
    assert rep.passed == all(flags)
    assert len(rep.failures()) == flags.count(False)
