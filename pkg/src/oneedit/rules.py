"""Horn-style rules over triples and seeded forward chaining.

Rule text looks like:

    President(X, Y) & Spouse(Y, Z) -> FirstLady(X, Z)

Uppercase single letters are variables, anything else is a constant.
Bodies have one or two atoms; two-atom bodies must share a variable.
Closure is seeds-driven: every derivation must ground at least one body
atom with a seed or an already-derived triple, so pre-existing facts never
fire a rule on their own.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import BadRule, RuleRelationUnknown
from .kg import KnowledgeGraph
from .triples import Triple

_ATOM = re.compile(r"^\s*([^\s(]+)\s*\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)\s*$")


def _is_var(term: str) -> bool:
    return len(term) == 1 and term.isupper()


@dataclass(frozen=True)
class Atom:
    relation: str
    subject: str
    object: str

    def variables(self) -> set[str]:
        return {t for t in (self.subject, self.object) if _is_var(t)}


@dataclass(frozen=True)
class LogicalRule:
    body: tuple[Atom, ...]
    head: Atom
    text: str = ""

    def __post_init__(self):
        if not 1 <= len(self.body) <= 2:
            raise BadRule(f"rule body must have 1 or 2 atoms: {self.text or self}")
        body_vars = set().union(*(a.variables() for a in self.body))
        if not self.head.variables() <= body_vars:
            raise BadRule(f"head variable not bound by body: {self.text or self}")
        if len(self.body) == 2 and not (self.body[0].variables() & self.body[1].variables()):
            raise BadRule(f"two-atom body must share a variable: {self.text or self}")

    def relations(self) -> set[str]:
        return {a.relation for a in self.body} | {self.head.relation}


def _parse_atom(text: str) -> Atom:
    m = _ATOM.match(text)
    if not m:
        raise BadRule(f"cannot parse atom: {text!r}")
    return Atom(relation=m.group(1), subject=m.group(2), object=m.group(3))


def parse_rule(line: str) -> LogicalRule:
    if "->" not in line:
        raise BadRule(f"rule missing '->': {line!r}")
    body_text, head_text = line.split("->", 1)
    atoms = tuple(_parse_atom(p) for p in body_text.split("&"))
    return LogicalRule(body=atoms, head=_parse_atom(head_text), text=line.strip())


def parse_rules(text: str) -> list[LogicalRule]:
    """Parse a rules file body. '#' starts a comment; blank lines skipped."""
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(parse_rule(line))
    return out


def load_rules(path: str) -> list[LogicalRule]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_rules(fh.read())


def _match_atom(atom: Atom, t: Triple, binding: dict[str, str]) -> Optional[dict[str, str]]:
    """Extend binding so atom matches t, or None if impossible."""
    if atom.relation != t.relation:
        return None
    b = dict(binding)
    for term, value in ((atom.subject, t.subject), (atom.object, t.object)):
        if _is_var(term):
            if b.get(term, value) != value:
                return None
            b[term] = value
        elif term != value:
            return None
    return b


def _ground_head(head: Atom, binding: dict[str, str]) -> Triple:
    s = binding[head.subject] if _is_var(head.subject) else head.subject
    o = binding[head.object] if _is_var(head.object) else head.object
    return Triple.of(s, head.relation, o)


def rule_closure(
    g: KnowledgeGraph,
    rules: Sequence[LogicalRule],
    seeds: Iterable[Triple],
    max_depth: int = 2,
) -> set[Triple]:
    """Forward-chain rules from the seed triples.

    Each derivation step must use at least one triple from seeds or from
    earlier derivations; remaining body atoms may match anything in the
    graph, the seeds, or earlier derivations. Runs to a fixed point or
    max_depth rounds, whichever comes first. Triples already in g are not
    reported (they are not new knowledge).
    """
    for rule in rules:
        for rel in rule.relations():
            if rel not in g.schemas:
                raise RuleRelationUnknown(f"rule uses unregistered relation {rel!r}: {rule.text}")

    seeds = list(seeds)
    pool: set[Triple] = set(g.triples()) | set(seeds)
    new: set[Triple] = set(seeds)
    derived: set[Triple] = set()

    for _round in range(max(0, max_depth)):
        found: set[Triple] = set()
        for rule in rules:
            if len(rule.body) == 1:
                for t in new:
                    b = _match_atom(rule.body[0], t, {})
                    if b is not None:
                        found.add(_ground_head(rule.head, b))
            else:
                a1, a2 = rule.body
                for first, second in ((a1, a2), (a2, a1)):
                    for t in new:
                        b = _match_atom(first, t, {})
                        if b is None:
                            continue
                        for u in pool:
                            b2 = _match_atom(second, u, b)
                            if b2 is not None:
                                found.add(_ground_head(rule.head, b2))
        fresh = {t for t in found if t not in pool}
        if not fresh:
            break
        derived |= fresh
        pool |= fresh
        new = fresh

    return {t for t in derived if t not in g}
