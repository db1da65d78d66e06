"""In-memory knowledge graph: a triple set plus a (subject, relation) index.

The graph owns a SchemaRegistry and refuses triples whose relation has no
schema. Functional relations keep at most one object per (subject,
relation); upserting a different object replaces the old one and reports
it, so callers can resolve the conflict upstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import UnknownRelation
from .triples import SchemaRegistry, Triple, canonicalize


@dataclass(frozen=True)
class UpsertOutcome:
    """Result of one upsert: exactly one of the three states."""

    kind: str  # "inserted" | "replaced" | "already_present"
    old_object: Optional[str] = None

    @property
    def inserted(self) -> bool:
        return self.kind == "inserted"

    @property
    def replaced(self) -> bool:
        return self.kind == "replaced"

    @property
    def already_present(self) -> bool:
        return self.kind == "already_present"


INSERTED = UpsertOutcome("inserted")
ALREADY_PRESENT = UpsertOutcome("already_present")


class KnowledgeGraph:
    def __init__(self, schemas: SchemaRegistry):
        self.schemas = schemas
        self._triples: set[Triple] = set()
        self._index: dict[tuple[str, str], set[str]] = {}

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, t: Triple) -> bool:
        return t in self._triples

    def triples(self) -> list[Triple]:
        return sorted(self._triples)

    def clone(self) -> "KnowledgeGraph":
        g = KnowledgeGraph(self.schemas)
        g._triples = set(self._triples)
        g._index = {k: set(v) for k, v in self._index.items()}
        return g

    # -- mutation ---------------------------------------------------------

    def upsert_triple(self, t: Triple) -> UpsertOutcome:
        """Insert t, replacing the old object when the relation is functional.

        Returns what happened; raises UnknownRelation when the relation has
        no schema. MalformedTriple is raised earlier, at Triple construction.
        """
        schema = self.schemas.get(t.relation)
        if schema is None:
            raise UnknownRelation(f"no schema registered for relation {t.relation!r}")
        if t in self._triples:
            return ALREADY_PRESENT
        existing = self._index.get(t.key())
        if schema.functional and existing:
            old = next(iter(existing))
            self._discard(Triple(t.subject, t.relation, old))
            self._add(t)
            return UpsertOutcome("replaced", old_object=old)
        self._add(t)
        return INSERTED

    def remove(self, t: Triple) -> bool:
        """Drop t if present. Returns whether anything was removed."""
        if t not in self._triples:
            return False
        self._discard(t)
        return True

    def _add(self, t: Triple) -> None:
        self._triples.add(t)
        self._index.setdefault(t.key(), set()).add(t.object)

    def _discard(self, t: Triple) -> None:
        self._triples.discard(t)
        objs = self._index.get(t.key())
        if objs is not None:
            objs.discard(t.object)
            if not objs:
                del self._index[t.key()]

    # -- queries ----------------------------------------------------------

    def lookup(self, subject: str, relation: str) -> set[str]:
        """All objects for (subject, relation); empty set when nothing matches."""
        key = (canonicalize(subject), canonicalize(relation))
        return set(self._index.get(key, ()))

    def neighborhood(self, subject: str, n: int) -> list[Triple]:
        """First n triples of the BFS expansion around subject.

        Triples are collected layer by layer (layer 1 = triples touching the
        subject in either position), sorted lexicographically within each
        layer, and truncated to n triples total.
        """
        return [t for t, _layer in self.neighborhood_layers(subject, n)]

    def neighborhood_layers(self, subject: str, n: int) -> list[tuple[Triple, int]]:
        """Like neighborhood() but keeps each triple's BFS layer number."""
        subject = canonicalize(subject)
        if n <= 0:
            return []
        # adjacency over the current triple set, built on demand
        adj: dict[str, set[Triple]] = {}
        for t in self._triples:
            adj.setdefault(t.subject, set()).add(t)
            adj.setdefault(t.object, set()).add(t)

        out: list[tuple[Triple, int]] = []
        seen_triples: set[Triple] = set()
        visited = {subject}
        frontier = [subject]
        layer = 0
        while frontier and len(out) < n:
            layer += 1
            layer_triples: set[Triple] = set()
            for node in frontier:
                for t in adj.get(node, ()):
                    if t not in seen_triples:
                        layer_triples.add(t)
            if not layer_triples:
                break
            ordered = sorted(layer_triples)
            seen_triples.update(layer_triples)
            for t in ordered:
                if len(out) >= n:
                    break
                out.append((t, layer))
            next_frontier = set()
            for t in ordered:
                for node in (t.subject, t.object):
                    if node not in visited:
                        visited.add(node)
                        next_frontier.add(node)
            frontier = sorted(next_frontier)
        return out

    # -- integrity --------------------------------------------------------

    def rebuilt_index(self) -> dict[tuple[str, str], set[str]]:
        idx: dict[tuple[str, str], set[str]] = {}
        for t in self._triples:
            idx.setdefault(t.key(), set()).add(t.object)
        return idx

    def check_integrity(self) -> None:
        """Assert the stored index matches a rebuild and schemas hold."""
        assert self._index == self.rebuilt_index(), "index out of sync with triple set"
        for key, objs in self._index.items():
            schema = self.schemas.get(key[1])
            assert schema is not None, f"triple with unregistered relation {key[1]!r}"
            if schema.functional:
                assert len(objs) == 1, f"functional relation {key[1]!r} has {len(objs)} objects for {key[0]!r}"


# -- file form -------------------------------------------------------------


def load_kg(path: str, schemas: SchemaRegistry) -> KnowledgeGraph:
    """Read a graph file: one {"s","r","o"} JSON object per line."""
    g = KnowledgeGraph(schemas)
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            g.upsert_triple(Triple.from_dict(json.loads(line)))
    return g


def dump_kg(g: KnowledgeGraph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in g.triples():
            fh.write(json.dumps(t.as_dict(), sort_keys=True) + "\n")
