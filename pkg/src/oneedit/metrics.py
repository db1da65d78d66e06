"""Evaluation cases, the five accuracy metrics, and report rendering.

All metrics are exact rationals (passed/total); rendering rounds to three
decimals only at the edge. Locality is a pre/post comparison on the same
prompts: a case passes when the model's answer did not change, including
the case where both sides have no answer at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .editor import SimulatedModel
from .errors import EmptyCategory

RELIABILITY = "reliability"
LOCALITY = "locality"
REVERSE = "reverse"
ONE_HOP = "one_hop"
SUB_REPLACE = "sub_replace"

CATEGORIES = (RELIABILITY, LOCALITY, REVERSE, ONE_HOP, SUB_REPLACE)
PORTABILITY = (REVERSE, ONE_HOP, SUB_REPLACE)

# column labels for the CSV face of a report
_CSV_LABELS = {
    RELIABILITY: "Reliability",
    LOCALITY: "Locality",
    REVERSE: "Reverse",
    ONE_HOP: "One-Hop",
    SUB_REPLACE: "Sub-Replace",
}


@dataclass(frozen=True)
class EvalCase:
    subject: str
    relation: str
    category: str
    expected: Optional[str] = None
    pre_edit_expected: Optional[str] = None  # locality only: documented baseline

    def as_json(self) -> dict:
        d = {"subject": self.subject, "relation": self.relation, "category": self.category}
        if self.expected is not None:
            d["expected"] = self.expected
        if self.pre_edit_expected is not None:
            d["pre_edit_expected"] = self.pre_edit_expected
        return d

    @staticmethod
    def from_json(d: dict) -> "EvalCase":
        return EvalCase(
            subject=d["subject"],
            relation=d["relation"],
            category=d["category"],
            expected=d.get("expected"),
            pre_edit_expected=d.get("pre_edit_expected"),
        )


def load_cases(path: str) -> list[EvalCase]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(EvalCase.from_json(json.loads(line)))
    return out


def dump_cases(cases: Iterable[EvalCase], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in cases:
            fh.write(json.dumps(c.as_json(), sort_keys=True) + "\n")


@dataclass(frozen=True)
class MetricValue:
    passed: int
    total: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.passed, self.total) if self.total else Fraction(0)

    def as_json(self) -> dict:
        return {
            "passed": self.passed,
            "total": self.total,
            "value": str(self.value),
            "rendered": fmt3(self.value),
        }


@dataclass(frozen=True)
class MetricsReport:
    method: str
    reliability: MetricValue
    locality: MetricValue
    reverse: MetricValue
    one_hop: MetricValue
    sub_replace: MetricValue

    def metric(self, category: str) -> MetricValue:
        return getattr(self, category)

    @property
    def average(self) -> Fraction:
        return sum((self.metric(c).value for c in CATEGORIES), Fraction(0)) / len(CATEGORIES)

    def as_json(self) -> dict:
        return {
            "method": self.method,
            "metrics": {c: self.metric(c).as_json() for c in CATEGORIES},
            "average": {"value": str(self.average), "rendered": fmt3(self.average)},
        }

    def json_text(self) -> str:
        return json.dumps(self.as_json(), sort_keys=True, indent=2) + "\n"

    def csv_text(self) -> str:
        header = ["Method"] + [_CSV_LABELS[c] for c in CATEGORIES] + ["Average"]
        row = [self.method] + [fmt3(self.metric(c).value) for c in CATEGORIES] + [fmt3(self.average)]
        return ",".join(header) + "\n" + ",".join(row) + "\n"


def fmt3(f: Fraction) -> str:
    """Exact three-decimal rendering (round-half-even, no float detour)."""
    scaled = round(f * 1000)
    sign = "-" if scaled < 0 else ""
    scaled = abs(scaled)
    return f"{sign}{scaled // 1000}.{scaled % 1000:03d}"


# -- the metric computations ---------------------------------------------------


def _answers(m: SimulatedModel, cases: Sequence[EvalCase]) -> list[Optional[str]]:
    return [m.answer(c.subject, c.relation) for c in cases]


def eval_reliability(m: SimulatedModel, cases: Sequence[EvalCase]) -> MetricValue:
    cases = [c for c in cases if c.category == RELIABILITY]
    if not cases:
        raise EmptyCategory("no reliability cases")
    passed = sum(1 for c in cases if m.answer(c.subject, c.relation) == c.expected)
    return MetricValue(passed, len(cases))


def eval_locality(m_pre: SimulatedModel, m_post: SimulatedModel, cases: Sequence[EvalCase]) -> MetricValue:
    """Fraction of out-of-scope prompts whose answer is unchanged pre->post."""
    cases = [c for c in cases if c.category == LOCALITY]
    if not cases:
        raise EmptyCategory("no locality cases")
    passed = 0
    for c in cases:
        if m_pre.answer(c.subject, c.relation) == m_post.answer(c.subject, c.relation):
            passed += 1
    return MetricValue(passed, len(cases))


def eval_portability(m: SimulatedModel, cases: Sequence[EvalCase], category: str) -> MetricValue:
    if category not in PORTABILITY:
        raise ValueError(f"not a portability category: {category!r}")
    cases = [c for c in cases if c.category == category]
    if not cases:
        raise EmptyCategory(f"no {category} cases")
    passed = sum(1 for c in cases if m.answer(c.subject, c.relation) == c.expected)
    return MetricValue(passed, len(cases))


def build_report(
    method: str,
    m_pre: SimulatedModel,
    m_post: SimulatedModel,
    cases: Sequence[EvalCase],
) -> MetricsReport:
    return MetricsReport(
        method=method,
        reliability=eval_reliability(m_post, cases),
        locality=eval_locality(m_pre, m_post, cases),
        reverse=eval_portability(m_post, cases, REVERSE),
        one_hop=eval_portability(m_post, cases, ONE_HOP),
        sub_replace=eval_portability(m_post, cases, SUB_REPLACE),
    )
