"""Triples, relation schemas, and the canonical text form both live on.

Canonicalization is deliberately dumb: strip the ends, collapse internal
whitespace runs, keep case. Matching stays case-sensitive everywhere so
"USA" and "usa" are different entities on purpose.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import BadSchema, MalformedTriple

_WS_RUN = re.compile(r"\s+")


def canonicalize(text: str) -> str:
    """Strip surrounding whitespace and collapse internal runs to one space."""
    return _WS_RUN.sub(" ", text.strip())


@dataclass(frozen=True, order=True)
class Triple:
    """One (subject, relation, object) fact, canonicalized at construction."""

    subject: str
    relation: str
    object: str

    @staticmethod
    def of(subject: str, relation: str, object: str) -> "Triple":
        s, r, o = canonicalize(subject), canonicalize(relation), canonicalize(object)
        if not s or not r or not o:
            raise MalformedTriple(
                f"triple field empty after canonicalization: ({subject!r}, {relation!r}, {object!r})"
            )
        return Triple(s, r, o)

    def key(self) -> tuple[str, str]:
        return (self.subject, self.relation)

    def as_dict(self) -> dict:
        return {"s": self.subject, "r": self.relation, "o": self.object}

    @staticmethod
    def from_dict(d: dict) -> "Triple":
        return Triple.of(d["s"], d["r"], d["o"])


@dataclass(frozen=True)
class RelationSchema:
    """Declared behaviour of one relation name.

    reversible relations must name an inverse; an inverse equal to the
    relation itself marks a symmetric relation. functional relations admit
    at most one object per subject.
    """

    name: str
    reversible: bool = False
    inverse: Optional[str] = None
    functional: bool = True

    def __post_init__(self):
        if self.reversible and not self.inverse:
            raise BadSchema(f"relation {self.name!r} is reversible but names no inverse")
        if not self.reversible and self.inverse:
            raise BadSchema(f"relation {self.name!r} names inverse {self.inverse!r} but is not reversible")

    @property
    def symmetric(self) -> bool:
        return self.reversible and self.inverse == self.name


class SchemaRegistry:
    """All relation schemas known to a graph, with involution checking.

    The registry enforces that inverses point at each other: if r names
    r_inv as its inverse, r_inv must exist (possibly added later) and name
    r back. validate() checks the closed-world property.
    """

    def __init__(self, schemas: Iterable[RelationSchema] = ()):
        self._by_name: dict[str, RelationSchema] = {}
        for sc in schemas:
            self.add(sc)

    def add(self, schema: RelationSchema) -> None:
        existing = self._by_name.get(schema.name)
        if existing is not None and existing != schema:
            raise BadSchema(f"conflicting redefinition of relation {schema.name!r}")
        self._by_name[schema.name] = schema

    def get(self, name: str) -> Optional[RelationSchema]:
        return self._by_name.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self):
        return iter(self._by_name.values())

    def __len__(self) -> int:
        return len(self._by_name)

    def names(self) -> list[str]:
        return sorted(self._by_name)

    def inverse_of(self, name: str) -> Optional[str]:
        sc = self._by_name.get(name)
        return sc.inverse if sc and sc.reversible else None

    def validate(self) -> None:
        """Check the involution property across the whole registry."""
        for sc in self._by_name.values():
            if not sc.reversible:
                continue
            twin = self._by_name.get(sc.inverse)
            if twin is None:
                raise BadSchema(f"relation {sc.name!r} names unknown inverse {sc.inverse!r}")
            if not twin.reversible or twin.inverse != sc.name:
                raise BadSchema(
                    f"inverse of {sc.name!r} is {sc.inverse!r}, but {twin.name!r} does not point back"
                )


def load_schemas(path: str) -> SchemaRegistry:
    """Read a schema file: a JSON array of relation descriptors."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise BadSchema(f"{path}: expected a JSON array of relation schemas")
    reg = SchemaRegistry()
    for row in raw:
        reg.add(
            RelationSchema(
                name=row["name"],
                reversible=bool(row.get("reversible", False)),
                inverse=row.get("inverse"),
                functional=bool(row.get("functional", True)),
            )
        )
    reg.validate()
    return reg


def dump_schemas(reg: SchemaRegistry, path: str) -> None:
    rows = [
        {"name": sc.name, "reversible": sc.reversible, "inverse": sc.inverse, "functional": sc.functional}
        for sc in sorted(reg, key=lambda s: s.name)
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
