"""Structured pass/fail records for numerical checks."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    relation: str  # "<=", "<", "~=", ">="
    tolerance: float
    passed: bool
    provenance: str
    note: str = ""

    def __post_init__(self):
        if not self.provenance:
            raise ValueError(f"check {self.name!r} has no provenance")


def _finite(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def make_check(name, value, bound, relation, tolerance, provenance, note=""):
    """Evaluate ``value relation bound`` with relative tolerance ``tolerance``.

    For "~=" the tolerance is relative to |bound| (absolute when bound is 0).
    """
    value = float(value)
    bound = float(bound)
    scale = abs(bound) if bound != 0 and math.isfinite(bound) else 1.0
    if relation == "<=":
        ok = value <= bound + tolerance * scale
    elif relation == "<":
        ok = value < bound
    elif relation == ">=":
        ok = value >= bound - tolerance * scale
    elif relation == "~=":
        ok = abs(value - bound) <= tolerance * scale
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return Check(name, value, bound, relation, float(tolerance), bool(ok and math.isfinite(value)), provenance, note)


@dataclass
class VerificationReport:
    title: str
    checks: list = field(default_factory=list)

    def add(self, check: Check):
        if any(c.name == check.name for c in self.checks):
            raise ValueError(f"check {check.name!r} is already in the report")
        self.checks.append(check)
        return check

    def extend(self, other: "VerificationReport"):
        for c in other.checks:
            self.add(c)
        return self

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        rows = []
        for c in self.checks:
            d = asdict(c)
            d["value"] = _finite(c.value)
            d["bound"] = _finite(c.bound)
            rows.append(d)
        return {"title": self.title, "passed": self.passed, "checks": rows}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    def summary(self):
        lines = [f"{self.title}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            flag = "pass" if c.passed else "FAIL"
            lines.append(f"  [{flag}] {c.name}: {c.value:.6g} {c.relation} {c.bound:.6g} (tol {c.tolerance:g}; {c.provenance})")
        return "\n".join(lines)
