"""HTTP state service: one writer thread, snapshot reads, file persistence.

All mutations (edits, rollbacks) are funneled through a single writer
thread via a bounded queue; HTTP handlers block on a per-request future
and get back a receipt. Readers never touch live state: after every
mutation the writer publishes an immutable deep-copied view, and reads
run against whichever view they grabbed. That one-writer contract is what
makes concurrent fuzzing linearizable.

Persistence is two append-only NDJSON files in the state directory:

  cache_log.jsonl   every edit's exact delta (noise included) + rollbacks;
                    replaying it over the freshly loaded base reproduces
                    the model bit-for-bit, RNG state included
  audit_log.jsonl   one record per request with the applied actions;
                    replaying its graph operations reproduces the KG

Restart = load the seed files, replay both logs. Records are flushed and
fsynced as written, so a killed process loses at most a request that was
never acknowledged.
"""

from __future__ import annotations

import copy
import json
import os
import queue
import re
import threading
from dataclasses import dataclass
from typing import Any, Callable, Optional

from . import editor as editor_mod
from .controller import AppliedAction, ConflictReport, Controller, detect_coverage_conflict, detect_reverse_conflict
from .editor import ACTIVE, EditCache, SimulatedModel, load_cache_log, replay_log_records
from .errors import MalformedTriple, NonFunctionalRelation, UnknownRelation, UnresolvableRollback
from .interpreter import interpret
from .kg import KnowledgeGraph, load_kg
from .rules import load_rules
from .scenario import RunConfig, load_aliases
from .triples import SchemaRegistry, Triple, load_schemas

_QUESTION = re.compile(r"^\s*(?:what|who)\s+is\s+the\s+(.+?)\s+of\s+(.+?)\s*\??\s*$", re.IGNORECASE)
_ARTICLE = re.compile(r"^(the|a|an)\s+", re.IGNORECASE)

CACHE_LOG = "cache_log.jsonl"
AUDIT_LOG = "audit_log.jsonl"


class ServiceError(Exception):
    """Carries an HTTP status for the API layer."""

    def __init__(self, status: int, detail: str, payload: Optional[dict] = None):
        super().__init__(detail)
        self.status = status
        self.detail = detail
        self.payload = payload or {}


@dataclass(frozen=True)
class ServicePaths:
    kg: str
    schema: str
    rules: Optional[str] = None
    aliases: Optional[str] = None
    state_dir: str = "state"


@dataclass
class ReadView:
    g: KnowledgeGraph
    m: SimulatedModel
    cache: EditCache
    audit: list[dict]


class SessionState:
    """Everything the service owns, plus the writer that owns it."""

    def __init__(self, paths: ServicePaths, config: RunConfig, queue_size: int = 64):
        self.paths = paths
        self.config = config
        self.schemas: SchemaRegistry = load_schemas(paths.schema)
        self.g: KnowledgeGraph = load_kg(paths.kg, self.schemas)
        self.rules = load_rules(paths.rules) if paths.rules else []
        self.aliases = load_aliases(paths.aliases) if paths.aliases else {}
        self.m = SimulatedModel.from_kg(self.g, config.model_config())
        self.cache = EditCache()
        self.controller = Controller(
            self.g, self.m, self.cache, rules=self.rules, aliases=self.aliases,
            cfg=config.controller_config(),
        )
        self.audit: list[dict] = []
        self.request_counter = 0

        os.makedirs(paths.state_dir, exist_ok=True)
        self._replay_logs()
        self._cache_fh = open(os.path.join(paths.state_dir, CACHE_LOG), "a", encoding="utf-8")
        self._audit_fh = open(os.path.join(paths.state_dir, AUDIT_LOG), "a", encoding="utf-8")

        self._queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self._view = self._make_view()
        self._writer = threading.Thread(target=self._writer_loop, name="oneedit-writer", daemon=True)
        self._writer.start()

    # -- persistence -------------------------------------------------------

    def _replay_logs(self) -> None:
        cache_path = os.path.join(self.paths.state_dir, CACHE_LOG)
        audit_path = os.path.join(self.paths.state_dir, AUDIT_LOG)
        if os.path.exists(cache_path):
            replay_log_records(load_cache_log(cache_path), self.m, self.cache)
        if os.path.exists(audit_path):
            with open(audit_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self.audit.append(json.loads(line))
            for record in self.audit:
                self._replay_graph_ops(record)
                self.request_counter = max(self.request_counter, record.get("request_id", 0))

    def _replay_graph_ops(self, record: dict) -> None:
        for action in record.get("actions", []):
            kind = action["kind"]
            t = Triple.from_dict(action["triple"])
            if kind == "edit" and action.get("source") != "alias":
                self.g.upsert_triple(t)
            elif kind == "kg_remove":
                self.g.remove(t)
            elif kind == "kg_insert":
                self.g.upsert_triple(t)
            elif kind == "rollback" and action.get("source") in ("coverage", "reverse", "twin"):
                # plan rollbacks remove their triple implicitly; API rollbacks
                # record explicit kg_remove/kg_insert actions instead
                self.g.remove(t)

    def _append_cache_records(self, records: list[dict]) -> None:
        for rec in records:
            self._cache_fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self._cache_fh.flush()
        os.fsync(self._cache_fh.fileno())

    def _append_audit(self, record: dict) -> None:
        self.audit.append(record)
        self._audit_fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._audit_fh.flush()
        os.fsync(self._audit_fh.fileno())

    # -- the writer --------------------------------------------------------

    def _writer_loop(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                return
            fn, future = item
            try:
                future["result"] = fn()
            except Exception as e:  # handed back to the HTTP layer
                future["error"] = e
            finally:
                self._view = self._make_view()
                future["event"].set()

    def submit(self, fn: Callable[[], Any]) -> Any:
        future = {"event": threading.Event(), "result": None, "error": None}
        try:
            self._queue.put((fn, future), block=False)
        except queue.Full:
            raise ServiceError(503, "writer queue full, try again")
        future["event"].wait()
        if future["error"] is not None:
            raise future["error"]
        return future["result"]

    def _make_view(self) -> ReadView:
        return ReadView(
            g=copy.deepcopy(self.g),
            m=SimulatedModel.restore(self.m.snapshot()),
            cache=copy.deepcopy(self.cache),
            audit=list(self.audit),
        )

    def view(self) -> ReadView:
        return self._view

    def close(self) -> None:
        self._queue.put(None)
        self._writer.join(timeout=5)
        self._cache_fh.close()
        self._audit_fh.close()

    # -- mutations (run on the writer thread) ------------------------------

    def _next_request_id(self) -> int:
        self.request_counter += 1
        return self.request_counter

    def do_edit(self, user: str, text: Optional[str] = None, triple: Optional[dict] = None) -> dict:
        if triple is not None:
            try:
                t = Triple.of(triple["s"], triple["r"], triple["o"])
            except (KeyError, TypeError) as e:
                raise ServiceError(400, f"triple body needs string fields s/r/o: {e}")
            except MalformedTriple as e:
                raise ServiceError(400, str(e))
            if t.relation not in self.schemas:
                raise ServiceError(422, f"unknown relation {t.relation!r}")
        else:
            intent = interpret(text or "", self.schemas)
            if not intent.is_edit:
                rid = self._next_request_id()
                answer = question_answer(text or "", self.m)
                record = {
                    "request_id": rid, "kind": "generate", "intent": "generate",
                    "user": user, "text": text, "actions": [], "answer": answer,
                }
                self._append_audit(record)
                return record
            t = intent.triple

        rid = self._next_request_id()
        before = len(self.cache.entries)
        try:
            plan = self.controller.plan_edit(t)
        except UnknownRelation as e:
            raise ServiceError(422, str(e))
        except UnresolvableRollback as e:
            conflict = self._conflict_report_for(t)
            raise ServiceError(409, str(e), payload={"conflict": conflict.as_json()})
        receipt = self.controller.apply_plan(plan, user, request_id=rid)
        self._log_cache_mutations(before, receipt.actions)
        res = self.m.query(t.subject, t.relation)
        record = {
            "request_id": rid, "kind": "edit", "intent": "edit",
            "user": user, "text": text,
            "triple": t.as_dict(),
            "conflict": plan.conflict.as_json() if plan.conflict else None,
            "plan": plan.as_json(),
            "already_present": plan.already_present,
            "actions": [a.as_json() for a in receipt.actions],
            "new_keys": receipt.new_keys(),
            "answer": _query_json(res),
        }
        self._append_audit(record)
        return record

    def _log_cache_mutations(self, cache_len_before: int, actions: list[AppliedAction]) -> None:
        records = []
        new_entries = {e.key for e in self.cache.entries[cache_len_before:]}
        for action in actions:
            if action.kind == "rollback" and action.key:
                records.append(editor_mod.rollback_record(action.key, self.cache._clock))
            elif action.kind == "edit" and action.key in new_entries:
                entry = self.cache.entry(action.key)
                records.append(editor_mod.edit_record(entry, self.m.rng.getstate()))
        self._append_cache_records(records)

    def _conflict_report_for(self, t: Triple) -> ConflictReport:
        schema = self.schemas.get(t.relation)
        forward = None
        if schema is not None and schema.functional:
            try:
                forward = detect_coverage_conflict(self.g, t)
            except NonFunctionalRelation:
                forward = None
        reverse = detect_reverse_conflict(self.g, t)
        kind = {(False, False): "None", (True, False): "Coverage", (False, True): "Reverse", (True, True): "Both"}[
            (forward is not None, reverse is not None)
        ]
        return ConflictReport(kind=kind, incoming=t, existing_forward=forward, existing_reverse=reverse)

    def do_rollback(self, key: str, user: str) -> dict:
        if not self.cache.has(key):
            raise ServiceError(404, f"unknown cache key {key!r}")
        entry = self.cache.entry(key)
        if entry.status != ACTIVE:
            raise ServiceError(410, f"cache key {key} was already rolled back")

        rid = self._next_request_id()
        before = len(self.cache.entries)
        actions: list[AppliedAction] = []
        origin = next((r for r in self.audit if r.get("request_id") == entry.request_id), None)
        origin_actions = (origin or {}).get("actions", [])
        by_key = {a.get("key"): a for a in origin_actions if a.get("key")}

        # rolling back the plan's primary edit unwinds the whole request
        # (implied twin, alias copies, augmentations); any other key is
        # surgical and unwinds alone
        if entry.source == "primary":
            targets = [
                e for e in reversed(self.cache.entries)
                if e.request_id == entry.request_id and e.status == ACTIVE
            ]
        else:
            targets = [entry]

        for target in targets:
            editor_mod.rollback(self.m, self.cache, target.key)
            actions.append(AppliedAction("rollback", target.triple, key=target.key, source="api"))
            if target.source == "alias":
                continue
            applied = by_key.get(target.key, {})
            if applied.get("kg_new") or applied.get("displaced") or not applied:
                if target.triple in self.g:
                    self.g.remove(target.triple)
                    actions.append(AppliedAction("kg_remove", target.triple, source="api"))
            displaced = applied.get("displaced")
            if displaced:
                old = Triple(target.triple.subject, target.triple.relation, displaced)
                self.g.upsert_triple(old)
                actions.append(AppliedAction("kg_insert", old, source="restore"))

        # file-seeded triples the plan removed come back: the model still
        # remembers them (the primary delta's clears are subtracted above)
        if entry.source == "primary":
            for action in origin_actions:
                if action["kind"] == "kg_remove":
                    t = Triple.from_dict(action["triple"])
                    self.g.upsert_triple(t)
                    actions.append(AppliedAction("kg_insert", t, source="restore"))

        self._log_cache_mutations(before, actions)
        record = {
            "request_id": rid, "kind": "rollback", "user": user, "key": key,
            "triple": entry.triple.as_dict(),
            "actions": [a.as_json() for a in actions],
        }
        self._append_audit(record)
        return record

def question_answer(text: str, m: SimulatedModel) -> Optional[dict]:
    """Best-effort answer for passthrough text shaped like 'What is the r of s?'."""
    qm = _QUESTION.match(text)
    if not qm:
        return None
    relation = qm.group(1).strip()
    subject = _ARTICLE.sub("", qm.group(2).strip())
    return _query_json(m.query(subject, relation))


def _query_json(res) -> Optional[dict]:
    if res is None:
        return None
    return {"answer": res.answer, "weight": str(res.weight), "overridden": res.overridden}


# -- reads over a view ---------------------------------------------------------


def query_view(view: ReadView, subject: str, relation: str) -> dict:
    res = view.m.query(subject, relation)
    if res is None:
        raise ServiceError(404, f"no answer for ({subject!r}, {relation!r})")
    provenance = None
    if res.overridden:
        provenance = view.m.winning_override_key(subject, relation)
    else:
        for entry in reversed(view.cache.entries):
            if entry.status != ACTIVE:
                continue
            touches = any(
                adj.query == (subject, relation) and adj.answer == res.answer and adj.change > 0
                for adj in entry.delta.adjustments
            )
            if touches:
                provenance = entry.key
                break
    return {
        "answer": res.answer,
        "weight": str(res.weight),
        "overridden": res.overridden,
        "provenance": provenance,
    }


def history_view(view: ReadView, user: Optional[str] = None, subject: Optional[str] = None) -> list[dict]:
    out = []
    for record in view.audit:
        if user is not None and record.get("user") != user:
            continue
        if subject is not None and not _touches_subject(record, subject):
            continue
        out.append(record)
    return out


def _touches_subject(record: dict, subject: str) -> bool:
    t = record.get("triple")
    if t and t.get("s") == subject:
        return True
    for action in record.get("actions", []):
        at = action.get("triple")
        if at and at.get("s") == subject:
            return True
    return False


def neighborhood_view(view: ReadView, subject: str, n: int) -> dict:
    triples = view.g.neighborhood(subject, n)
    nodes = sorted({subject} | {t.subject for t in triples} | {t.object for t in triples})
    return {
        "subject": subject,
        "triples": [t.as_dict() for t in triples],
        "nodes": nodes,
        "edges": [{"source": t.subject, "relation": t.relation, "target": t.object} for t in triples],
    }


def cache_entries_view(view: ReadView) -> list[dict]:
    return [
        {
            "key": e.key,
            "triple": e.triple.as_dict(),
            "user": e.user,
            "status": e.status,
            "source": e.source,
            "request_id": e.request_id,
        }
        for e in view.cache.entries
    ]


# -- FastAPI app ----------------------------------------------------------------


def build_app(state: SessionState):
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="oneedit service")

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail, **exc.payload})

    @app.post("/api/edit")
    def api_edit(body: dict):
        text = body.get("text")
        triple = body.get("triple")
        if triple is None and (not isinstance(text, str) or not text.strip()):
            raise ServiceError(400, "body must include non-empty 'text' or a 'triple'")
        user = body.get("user") or "api"
        return state.submit(lambda: state.do_edit(user, text=text, triple=triple))

    @app.post("/api/query")
    def api_query(body: dict):
        subject, relation = body.get("subject"), body.get("relation")
        if not subject or not relation:
            raise ServiceError(400, "body must include 'subject' and 'relation'")
        return query_view(state.view(), subject, relation)

    @app.post("/api/rollback/{key}")
    def api_rollback(key: str, body: Optional[dict] = None):
        user = (body or {}).get("user") or "api"
        return state.submit(lambda: state.do_rollback(key, user))

    @app.get("/api/history")
    def api_history(user: Optional[str] = None, subject: Optional[str] = None):
        return {"entries": history_view(state.view(), user, subject)}

    @app.get("/api/cache")
    def api_cache():
        return {"entries": cache_entries_view(state.view())}

    @app.get("/api/graph/neighborhood")
    def api_neighborhood(subject: str, n: int = 10):
        return neighborhood_view(state.view(), subject, n)

    @app.get("/api/health")
    def api_health():
        view = state.view()
        return {
            "status": "ok",
            "triples": len(view.g),
            "cache_entries": len(view.cache),
            "active_entries": len(view.cache.active_entries()),
            "requests": len(view.audit),
        }

    return app
