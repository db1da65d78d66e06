"""Deterministic utterance interpreter: text in, edit-or-generate intent out.

Four grammars are tried in order; the first one whose shape matches wins:

  1. ``EDIT (<s> | <r> | <o>)``          the explicit DSL form
  2. ``Change the <r> of <s> to <o>``
  3. ``Set <s> <r> to <o>``
  4. ``Edit: <s>'s <r> is <o>``          prose form needs the Edit: marker

Keywords match case-insensitively; field text keeps its case. A leading
article (the/a/an) is dropped from fields extracted by the prose grammars,
so "Change the President of the USA to Biden" yields subject "USA".
Anything that matches no grammar — or names a relation the schema registry
does not know — passes through unchanged as a generate intent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .errors import MalformedTriple
from .triples import SchemaRegistry, Triple

_DSL = re.compile(r"^\s*EDIT\s*\((.*)\)\s*$", re.IGNORECASE | re.DOTALL)
_CHANGE = re.compile(r"^\s*change\s+the\s+(.+?)\s+of\s+(.+)\s+to\s+(.+?)\s*$", re.IGNORECASE)
_SET = re.compile(r"^\s*set\s+(\S+)\s+(.+)\s+to\s+(.+?)\s*$", re.IGNORECASE)
_PROSE = re.compile(r"^\s*edit:\s*(.+?)'s\s+(.+?)\s+is\s+(.+?)\s*$", re.IGNORECASE)
_ARTICLE = re.compile(r"^(the|a|an)\s+", re.IGNORECASE)


@dataclass(frozen=True)
class Intent:
    kind: str  # "edit" | "generate"
    triple: Optional[Triple] = None
    text: Optional[str] = None

    @staticmethod
    def edit(t: Triple) -> "Intent":
        return Intent(kind="edit", triple=t)

    @staticmethod
    def generate(u: str) -> "Intent":
        return Intent(kind="generate", text=u)

    @property
    def is_edit(self) -> bool:
        return self.kind == "edit"


def _strip_article(field: str) -> str:
    return _ARTICLE.sub("", field.strip())


def _try_dsl(u: str) -> Optional[tuple[str, str, str]]:
    m = _DSL.match(u)
    if not m:
        return None
    parts = m.group(1).split("|")
    if len(parts) != 3:
        return None
    return (parts[0], parts[1], parts[2])


def _try_prose(u: str) -> Optional[tuple[str, str, str]]:
    m = _CHANGE.match(u)
    if m:
        r, s, o = m.group(1), m.group(2), m.group(3)
        return tuple(_strip_article(f) for f in (s, r, o))
    m = _SET.match(u)
    if m:
        return tuple(_strip_article(f) for f in (m.group(1), m.group(2), m.group(3)))
    m = _PROSE.match(u)
    if m:
        return tuple(_strip_article(f) for f in (m.group(1), m.group(2), m.group(3)))
    return None


def interpret(u: str, schemas: SchemaRegistry) -> Intent:
    """Map one utterance to exactly one intent. Total: never raises."""
    fields = _try_dsl(u)
    if fields is None:
        fields = _try_prose(u)
    if fields is None:
        return Intent.generate(u)
    try:
        t = Triple.of(*fields)
    except MalformedTriple:
        return Intent.generate(u)
    if t.relation not in schemas:
        return Intent.generate(u)
    return Intent.edit(t)


def render_dsl(t: Triple) -> str:
    """The canonical DSL spelling of a triple; interpret() inverts this."""
    return f"EDIT ({t.subject} | {t.relation} | {t.object})"
