"""Conflict-resolving controller: turns one edit intent into a full plan.

A plan has three parts, applied strictly in order:

  rollbacks      undo edits the new fact supersedes (coverage: same subject
                 and relation, different object; reverse: the implied
                 inverse fact contradicts an existing one), plus the
                 reverse twins of anything removed, so the graph keeps its
                 inverse closure;
  edits          the new triple, its implied inverse when the relation is
                 reversible, and — behind a flag — copies under the
                 subject's aliases (model-only surface forms);
  augmentations  nearby graph triples and rule-derived consequences,
                 re-asserted into the model to reinforce the edit, capped
                 by a budget n.

Conflicting triples that came from the seed files have no cache entry to
roll back: the plan removes them from the graph and leaves the model's
base memory alone (strict mode refuses instead). Application is atomic —
any failure restores graph, model, and cache snapshots.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import editor
from .editor import DIRECT, EditCache, SimulatedModel
from .errors import NonFunctionalRelation, UnknownRelation, UnresolvableRollback
from .kg import KnowledgeGraph
from .rules import LogicalRule, rule_closure
from .triples import Triple

NONE = "None"
COVERAGE = "Coverage"
REVERSE = "Reverse"
BOTH = "Both"


@dataclass(frozen=True)
class AugmentConfig:
    n: int = 8
    rule_depth: int = 2
    rules_enabled: bool = True


@dataclass(frozen=True)
class ControllerConfig:
    augment: AugmentConfig = AugmentConfig()
    alias_expansion: bool = False
    strict: bool = False
    # extra noise probability per additional triple in one applied batch
    # (direct backend only); models interference between batched edits
    noise_batch_scale: Fraction = Fraction(1, 50)


@dataclass(frozen=True)
class ConflictReport:
    kind: str  # None | Coverage | Reverse | Both
    incoming: Triple
    existing_forward: Optional[Triple] = None
    existing_reverse: Optional[Triple] = None

    def as_json(self) -> dict:
        return {
            "kind": self.kind,
            "incoming": self.incoming.as_dict(),
            "existing_forward": self.existing_forward.as_dict() if self.existing_forward else None,
            "existing_reverse": self.existing_reverse.as_dict() if self.existing_reverse else None,
        }


@dataclass(frozen=True)
class RollbackItem:
    """One thing the plan will undo. key is None for file-seeded triples."""

    triple: Triple
    key: Optional[str]
    reason: str  # coverage | reverse | twin

    def as_json(self) -> dict:
        return {"triple": self.triple.as_dict(), "key": self.key, "reason": self.reason}


@dataclass
class EditPlan:
    incoming: Triple
    rollbacks: list[RollbackItem] = field(default_factory=list)
    edits: list[Triple] = field(default_factory=list)
    alias_edits: list[Triple] = field(default_factory=list)
    augmentations: list[Triple] = field(default_factory=list)
    conflict: Optional[ConflictReport] = None
    already_present: bool = False

    def as_json(self) -> dict:
        return {
            "incoming": self.incoming.as_dict(),
            "rollbacks": [r.as_json() for r in self.rollbacks],
            "edits": [t.as_dict() for t in self.edits],
            "alias_edits": [t.as_dict() for t in self.alias_edits],
            "augmentations": [t.as_dict() for t in self.augmentations],
            "conflict": self.conflict.as_json() if self.conflict else None,
            "already_present": self.already_present,
        }


@dataclass(frozen=True)
class AppliedAction:
    kind: str  # rollback | kg_remove | kg_insert | edit
    triple: Triple
    key: Optional[str] = None
    source: str = ""  # primary | implied | alias | augmentation | supersede
    kg_new: Optional[bool] = None  # edit actions: did the upsert insert a new triple?
    displaced: Optional[str] = None  # edit actions: object replaced by a functional upsert

    def as_json(self) -> dict:
        return {
            "kind": self.kind,
            "triple": self.triple.as_dict(),
            "key": self.key,
            "source": self.source,
            "kg_new": self.kg_new,
            "displaced": self.displaced,
        }


@dataclass
class Receipt:
    plan: EditPlan
    actions: list[AppliedAction] = field(default_factory=list)

    def new_keys(self) -> list[str]:
        return [a.key for a in self.actions if a.kind == "edit" and a.key]

    def as_json(self) -> dict:
        return {"plan": self.plan.as_json(), "actions": [a.as_json() for a in self.actions]}


# -- detection ---------------------------------------------------------------


def detect_coverage_conflict(g: KnowledgeGraph, t: Triple) -> Optional[Triple]:
    """The existing (s, r, o') this edit supersedes, if any.

    Only meaningful for functional relations; raises otherwise. A triple
    already present verbatim is not a conflict.
    """
    schema = g.schemas.get(t.relation)
    if schema is None:
        raise UnknownRelation(f"no schema for relation {t.relation!r}")
    if not schema.functional:
        raise NonFunctionalRelation(f"coverage conflicts undefined for non-functional {t.relation!r}")
    if t in g:
        return None
    for obj in g.lookup(t.subject, t.relation):
        if obj != t.object:
            return Triple(t.subject, t.relation, obj)
    return None


def detect_reverse_conflict(g: KnowledgeGraph, t: Triple) -> Optional[Triple]:
    """An existing inverse fact (o, r_inv, s') with s' != s, if any.

    Only a functional inverse can contradict: a non-functional one admits
    several subjects side by side, so nothing needs to give way.
    """
    inv = g.schemas.inverse_of(t.relation)
    if inv is None:
        return None
    inv_schema = g.schemas.get(inv)
    if inv_schema is not None and not inv_schema.functional:
        return None
    for subj in sorted(g.lookup(t.object, inv)):
        if subj != t.subject:
            return Triple(t.object, inv, subj)
    return None


# -- the controller ----------------------------------------------------------


class Controller:
    """Owns one (graph, model, cache) trio plus rules and aliases."""

    def __init__(
        self,
        g: KnowledgeGraph,
        m: SimulatedModel,
        cache: EditCache,
        rules: Sequence[LogicalRule] = (),
        aliases: Optional[dict[str, list[str]]] = None,
        cfg: ControllerConfig = ControllerConfig(),
    ):
        self.g = g
        self.m = m
        self.cache = cache
        self.rules = list(rules)
        self.aliases = aliases or {}
        self.cfg = cfg

    # -- planning ----------------------------------------------------------

    def plan_edit(self, t: Triple) -> EditPlan:
        schema = self.g.schemas.get(t.relation)
        if schema is None:
            raise UnknownRelation(f"no schema for relation {t.relation!r}")

        if t in self.g:
            return EditPlan(incoming=t, conflict=ConflictReport(NONE, incoming=t), already_present=True)

        rollbacks: list[RollbackItem] = []
        edits: list[Triple] = [t]
        existing_forward: Optional[Triple] = None
        existing_reverse: Optional[Triple] = None

        def add_rollback(conflicting: Triple, reason: str) -> None:
            key = self.cache.active_key_for_triple(conflicting)
            if key is None and self.cfg.strict:
                raise UnresolvableRollback(
                    f"conflicting triple {conflicting} has no active cache entry (strict mode)"
                )
            rollbacks.append(RollbackItem(conflicting, key, reason))
            # keep inverse closure: removing a reversible fact removes its twin
            inv = self.g.schemas.inverse_of(conflicting.relation)
            if inv is not None:
                twin = Triple(conflicting.object, inv, conflicting.subject)
                if twin in self.g and all(rb.triple != twin for rb in rollbacks):
                    twin_key = self.cache.active_key_for_triple(twin)
                    rollbacks.append(RollbackItem(twin, twin_key, "twin"))

        if schema.functional:
            existing_forward = detect_coverage_conflict(self.g, t)
            if existing_forward is not None:
                add_rollback(existing_forward, "coverage")

        if schema.reversible:
            implied = Triple(t.object, schema.inverse, t.subject)
            existing_reverse = detect_reverse_conflict(self.g, t)
            if existing_reverse is not None and all(rb.triple != existing_reverse for rb in rollbacks):
                add_rollback(existing_reverse, "reverse")
            if implied != t and implied not in self.g:
                edits.append(implied)

        alias_edits: list[Triple] = []
        if self.cfg.alias_expansion:
            for alias in self.aliases.get(t.subject, []):
                at = Triple.of(alias, t.relation, t.object)
                if at != t and at not in alias_edits:
                    alias_edits.append(at)

        kind = {(False, False): NONE, (True, False): COVERAGE, (False, True): REVERSE, (True, True): BOTH}[
            (existing_forward is not None, existing_reverse is not None)
        ]
        conflict = ConflictReport(
            kind=kind, incoming=t, existing_forward=existing_forward, existing_reverse=existing_reverse
        )

        augmentations = self._plan_augmentations(t, rollbacks, edits, alias_edits)
        return EditPlan(
            incoming=t,
            rollbacks=rollbacks,
            edits=edits,
            alias_edits=alias_edits,
            augmentations=augmentations,
            conflict=conflict,
        )

    def _plan_augmentations(
        self,
        t: Triple,
        rollbacks: list[RollbackItem],
        edits: list[Triple],
        alias_edits: list[Triple],
    ) -> list[Triple]:
        n = self.cfg.augment.n
        if n <= 0:
            return []

        # hypothetical post-update graph: conflicts gone, new facts in
        hyp = self.g.clone()
        for rb in rollbacks:
            hyp.remove(rb.triple)
        for e in edits:
            hyp.upsert_triple(e)

        if self.cfg.augment.rules_enabled and self.rules:
            derived = rule_closure(hyp, self.rules, seeds=edits, max_depth=self.cfg.augment.rule_depth)
        else:
            derived = set()

        edit_set = set(edits) | set(alias_edits)

        def functional(tr: Triple) -> bool:
            sc = hyp.schemas.get(tr.relation)
            return sc is not None and sc.functional

        claimed = {e.key() for e in edit_set if functional(e)}
        rule_list = [
            x for x in sorted(derived) if x not in edit_set and not (functional(x) and x.key() in claimed)
        ]
        for x in rule_list:
            if functional(x):
                claimed.add(x.key())

        fetch = n + len(edit_set) + len(rule_list) + 8
        kept_layer1: list[Triple] = []
        kept_deep: list[Triple] = []
        rule_set = set(rule_list)
        for tr, layer in hyp.neighborhood_layers(t.subject, fetch):
            if tr in edit_set or tr in rule_set:
                continue
            if functional(tr) and tr.key() in claimed:
                continue  # a rule-derived or edited fact supersedes it
            (kept_layer1 if layer == 1 else kept_deep).append(tr)

        # rank: adjacent facts, then rule consequences, then the deeper shell
        ordered = kept_layer1 + rule_list + kept_deep
        return ordered[:n]

    # -- application -------------------------------------------------------

    def apply_plan(self, plan: EditPlan, user: str, request_id: Optional[int] = None) -> Receipt:
        """Run the plan atomically: rollbacks, then edits, then augmentations."""
        receipt = Receipt(plan=plan)
        if plan.already_present:
            return receipt

        snap_g = self.g.clone()
        snap_m = self.m.snapshot()
        snap_cache = copy.deepcopy(self.cache)
        try:
            self._apply_inner(plan, user, request_id, receipt)
        except Exception:
            self.g._triples = snap_g._triples
            self.g._index = snap_g._index
            restored = SimulatedModel.restore(snap_m)
            self.m.base = restored.base
            self.m.scores = restored.scores
            self.m.overrides = restored.overrides
            self.m.active_keys = restored.active_keys
            self.m.rng.setstate(snap_m.rng_state)
            self.cache.entries = snap_cache.entries
            self.cache._by_key = snap_cache._by_key
            self.cache._clock = snap_cache._clock
            self.cache._seq = snap_cache._seq
            raise
        return receipt

    def _apply_inner(self, plan: EditPlan, user: str, request_id: Optional[int], receipt: Receipt) -> None:
        for rb in plan.rollbacks:
            if rb.key is None:
                if self.cfg.strict:
                    raise UnresolvableRollback(f"no active cache entry for {rb.triple} (strict mode)")
                self.g.remove(rb.triple)
                receipt.actions.append(AppliedAction("kg_remove", rb.triple, source=rb.reason))
            else:
                editor.rollback(self.m, self.cache, rb.key)
                self.g.remove(rb.triple)
                receipt.actions.append(AppliedAction("rollback", rb.triple, key=rb.key, source=rb.reason))

        batch = len(plan.edits) + len(plan.alias_edits) + len(plan.augmentations)
        extra = Fraction(0)
        if self.m.config.backend == DIRECT and batch > 1:
            extra = self.cfg.noise_batch_scale * (batch - 1)

        sources = [("primary" if t == plan.incoming else "implied", t, True) for t in plan.edits]
        sources += [("alias", t, False) for t in plan.alias_edits]
        sources += [("augmentation", t, True) for t in plan.augmentations]

        for source, t, touches_kg in sources:
            self._supersede_active(t, receipt)
            kg_new: Optional[bool] = None
            displaced: Optional[str] = None
            if touches_kg:
                outcome = self.g.upsert_triple(t)
                kg_new = outcome.kind == "inserted"
                displaced = outcome.old_object if outcome.kind == "replaced" else None
            # conflict-resolved writes displace competing answers outright;
            # augmentation re-assertions behave like plain batch edits
            schema = self.g.schemas.get(t.relation)
            clear = source != "augmentation" and schema is not None and schema.functional
            key = editor.edit(
                self.m, self.cache, t, user,
                extra_noise_rate=extra, request_id=request_id, source=source, clear_others=clear,
            )
            receipt.actions.append(
                AppliedAction("edit", t, key=key, source=source, kg_new=kg_new, displaced=displaced)
            )

    def _supersede_active(self, t: Triple, receipt: Receipt) -> None:
        """Keep at most one active cache entry per functional (subject, relation)."""
        schema = self.g.schemas.get(t.relation)
        if schema is None or not schema.functional:
            return
        for key in self.cache.active_keys_for_query(t.subject, t.relation):
            entry = editor.rollback(self.m, self.cache, key)
            receipt.actions.append(AppliedAction("rollback", entry.triple, key=key, source="supersede"))

    def handle(self, t: Triple, user: str, request_id: Optional[int] = None) -> Receipt:
        """plan_edit + apply_plan in one step."""
        return self.apply_plan(self.plan_edit(t), user, request_id=request_id)
