"""Simulated editable model, edit deltas, and the append-only edit cache.

The model is a scoring table: (subject, relation) -> {answer: weight}.
Weights are exact rationals (fractions.Fraction), so applying a delta and
later subtracting it restores the previous state bit-for-bit — rollback is
subtraction, never approximation.

Two backends with very different failure modes:

* direct   — additive weight surgery. The new answer gets weight 1, the
             old top answer keeps a residual fraction rho of its weight,
             and with some probability an unrelated entry gets nudged by
             +/-delta (the nudge is recorded in the delta, so it rolls
             back too). Models fine-tuning-style editors.
* codebook — an exact scoped override for the edited query and nothing
             else. Perfect locality, no generalization. Models retrieval-
             style editors.

The cache is an append-only log of (key, delta, triple, user, ...) whose
entries flip Active -> RolledBack at most once. Serialized to NDJSON it
doubles as the persistence story: replaying the file over a freshly
loaded base reproduces the live model exactly, noise included.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Optional, Union

from .errors import KeyNotActive
from .kg import KnowledgeGraph
from .triples import Triple

QueryKey = tuple[str, str]

DIRECT = "direct"
CODEBOOK = "codebook"

# Nominal weight reported for answers that win via a codebook override; the
# override mechanism outranks every score, so the number is informational.
OVERRIDE_WEIGHT = Fraction(1)


def as_fraction(x: Union[int, float, str, Fraction]) -> Fraction:
    """Exact rational from common inputs; floats go via their decimal text."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass(frozen=True)
class ModelConfig:
    backend: str = DIRECT
    rho: Fraction = Fraction(1, 2)        # residual fraction left on a superseded answer
    delta: Fraction = Fraction(1, 10)     # locality noise magnitude
    noise_rate: Fraction = Fraction(1, 5) # chance one edit perturbs an unrelated entry
    seed: int = 0

    def __post_init__(self):
        if self.backend not in (DIRECT, CODEBOOK):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class Adjustment:
    query: QueryKey
    answer: str
    change: Fraction

    def as_json(self) -> list:
        return [list(self.query), self.answer, str(self.change)]

    @staticmethod
    def from_json(row: list) -> "Adjustment":
        return Adjustment((row[0][0], row[0][1]), row[1], Fraction(row[2]))


@dataclass(frozen=True)
class EditDelta:
    """Everything one edit did to the model, exactly and self-inversely."""

    backend: str
    adjustments: tuple[Adjustment, ...] = ()
    noise: tuple[Adjustment, ...] = ()
    override: Optional[tuple[QueryKey, str]] = None  # codebook only

    def as_json(self) -> dict:
        d = {
            "backend": self.backend,
            "adjustments": [a.as_json() for a in self.adjustments],
            "noise": [a.as_json() for a in self.noise],
        }
        if self.override is not None:
            d["override"] = [list(self.override[0]), self.override[1]]
        return d

    @staticmethod
    def from_json(d: dict) -> "EditDelta":
        override = None
        if d.get("override") is not None:
            qk, ans = d["override"]
            override = ((qk[0], qk[1]), ans)
        return EditDelta(
            backend=d["backend"],
            adjustments=tuple(Adjustment.from_json(r) for r in d["adjustments"]),
            noise=tuple(Adjustment.from_json(r) for r in d["noise"]),
            override=override,
        )


@dataclass(frozen=True)
class QueryResult:
    answer: str
    weight: Fraction
    overridden: bool = False


@dataclass
class ModelSnapshot:
    base: dict
    scores: dict
    overrides: dict
    active_keys: list
    rng_state: tuple
    config: ModelConfig


def _copy_table(table: dict[QueryKey, dict[str, Fraction]]) -> dict[QueryKey, dict[str, Fraction]]:
    return {qk: dict(answers) for qk, answers in table.items()}


class SimulatedModel:
    """A scoring table plus an override stack, mutated only through deltas."""

    def __init__(self, config: ModelConfig, base: Optional[dict[QueryKey, dict[str, Fraction]]] = None):
        self.config = config
        self.base: dict[QueryKey, dict[str, Fraction]] = _copy_table(base or {})
        self.scores: dict[QueryKey, dict[str, Fraction]] = _copy_table(self.base)
        # override stack per query key: list of (seq, key, answer), append order
        self.overrides: dict[QueryKey, list[tuple[int, str, str]]] = {}
        self.active_keys: list[str] = []
        self.rng = random.Random(config.seed)

    @classmethod
    def from_kg(cls, g: KnowledgeGraph, config: ModelConfig, weight: Fraction = Fraction(1)) -> "SimulatedModel":
        """Seed base scores from a graph: every stored triple scores `weight`."""
        base: dict[QueryKey, dict[str, Fraction]] = {}
        for t in g.triples():
            base.setdefault(t.key(), {})[t.object] = weight
        return cls(config, base)

    # -- score bookkeeping -------------------------------------------------

    def _bump(self, qk: QueryKey, answer: str, change: Fraction) -> None:
        answers = self.scores.setdefault(qk, {})
        new = answers.get(answer, Fraction(0)) + change
        if new == 0:
            answers.pop(answer, None)
            if not answers:
                del self.scores[qk]
        else:
            answers[answer] = new

    def apply_delta(self, key: str, delta: EditDelta) -> None:
        for adj in delta.adjustments + delta.noise:
            self._bump(adj.query, adj.answer, adj.change)
        if delta.override is not None:
            qk, ans = delta.override
            seq = _seq_of(key)
            self.overrides.setdefault(qk, []).append((seq, key, ans))
        self.active_keys.append(key)

    def subtract_delta(self, key: str, delta: EditDelta) -> None:
        for adj in delta.adjustments + delta.noise:
            self._bump(adj.query, adj.answer, -adj.change)
        if delta.override is not None:
            qk, _ans = delta.override
            stack = self.overrides.get(qk, [])
            self.overrides[qk] = [row for row in stack if row[1] != key]
            if not self.overrides[qk]:
                del self.overrides[qk]
        self.active_keys.remove(key)

    # -- reads --------------------------------------------------------------

    def top_scored(self, qk: QueryKey) -> Optional[tuple[str, Fraction]]:
        """Best positively-scored answer; ties broken lexicographically."""
        answers = self.scores.get(qk)
        if not answers:
            return None
        positive = [(ans, w) for ans, w in answers.items() if w > 0]
        if not positive:
            return None
        best_w = max(w for _a, w in positive)
        best_a = min(a for a, w in positive if w == best_w)
        return (best_a, best_w)

    def query(self, subject: str, relation: str) -> Optional[QueryResult]:
        qk = (subject, relation)
        stack = self.overrides.get(qk)
        if stack:
            _seq, _key, ans = max(stack)
            return QueryResult(ans, OVERRIDE_WEIGHT, overridden=True)
        top = self.top_scored(qk)
        if top is None:
            return None
        return QueryResult(top[0], top[1])

    def answer(self, subject: str, relation: str) -> Optional[str]:
        res = self.query(subject, relation)
        return res.answer if res else None

    def score_of(self, subject: str, relation: str, obj: str) -> Fraction:
        return self.scores.get((subject, relation), {}).get(obj, Fraction(0))

    def winning_override_key(self, subject: str, relation: str) -> Optional[str]:
        stack = self.overrides.get((subject, relation))
        if not stack:
            return None
        return max(stack)[1]

    # -- state as data -------------------------------------------------------

    def state_view(self) -> dict:
        """Comparable view: scores, override stacks, active key order."""
        return {
            "scores": {qk: dict(a) for qk, a in sorted(self.scores.items())},
            "overrides": {qk: list(st) for qk, st in sorted(self.overrides.items())},
            "active_keys": list(self.active_keys),
        }

    def recomputed_scores(self, cache: "EditCache") -> dict:
        """Recompute scores from base plus every active delta, from scratch."""
        fresh = SimulatedModel(self.config, self.base)
        for key in self.active_keys:
            fresh.apply_delta(key, cache.entry(key).delta)
        return fresh.state_view()

    def snapshot(self) -> ModelSnapshot:
        return ModelSnapshot(
            base=_copy_table(self.base),
            scores=_copy_table(self.scores),
            overrides={qk: list(st) for qk, st in self.overrides.items()},
            active_keys=list(self.active_keys),
            rng_state=self.rng.getstate(),
            config=self.config,
        )

    @staticmethod
    def restore(snap: ModelSnapshot) -> "SimulatedModel":
        m = SimulatedModel(snap.config, snap.base)
        m.scores = _copy_table(snap.scores)
        m.overrides = {qk: list(st) for qk, st in snap.overrides.items()}
        m.active_keys = list(snap.active_keys)
        m.rng.setstate(snap.rng_state)
        return m


# -- edit cache --------------------------------------------------------------

ACTIVE = "Active"
ROLLED_BACK = "RolledBack"


@dataclass
class CacheEntry:
    key: str
    seq: int
    triple: Triple
    user: str
    timestamp: int
    delta: EditDelta
    status: str = ACTIVE
    request_id: Optional[int] = None
    source: str = "raw"  # primary | implied | alias | augmentation | raw


def _seq_of(key: str) -> int:
    return int(key.split("-", 1)[0][1:])


def make_key(seq: int, t: Triple, user: str) -> str:
    digest = hashlib.sha256(f"{t.subject}\x1f{t.relation}\x1f{t.object}".encode("utf-8")).hexdigest()[:8]
    return f"e{seq:06d}-{digest}-{user}"


class EditCache:
    """Append-only record of every edit ever applied to one model."""

    def __init__(self):
        self.entries: list[CacheEntry] = []
        self._by_key: dict[str, CacheEntry] = {}
        self._clock = 0
        self._seq = 0

    def __len__(self) -> int:
        return len(self.entries)

    def tick(self) -> int:
        self._clock += 1
        return self._clock

    def next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def append(self, entry: CacheEntry) -> None:
        if entry.key in self._by_key:
            raise ValueError(f"duplicate cache key {entry.key}")
        self.entries.append(entry)
        self._by_key[entry.key] = entry
        self._seq = max(self._seq, entry.seq)
        self._clock = max(self._clock, entry.timestamp)

    def entry(self, key: str) -> CacheEntry:
        if key not in self._by_key:
            raise KeyNotActive(f"unknown cache key {key!r}")
        return self._by_key[key]

    def has(self, key: str) -> bool:
        return key in self._by_key

    def mark_rolled_back(self, key: str) -> CacheEntry:
        e = self.entry(key)
        if e.status != ACTIVE:
            raise KeyNotActive(f"cache key {key} is not active")
        e.status = ROLLED_BACK
        return e

    def active_entries(self) -> list[CacheEntry]:
        return [e for e in self.entries if e.status == ACTIVE]

    def active_key_for_triple(self, t: Triple) -> Optional[str]:
        """Most recent active key whose entry recorded exactly this triple."""
        for e in reversed(self.entries):
            if e.status == ACTIVE and e.triple == t:
                return e.key
        return None

    def active_keys_for_query(self, subject: str, relation: str) -> list[str]:
        """Active keys touching (subject, relation), oldest first."""
        return [
            e.key
            for e in self.entries
            if e.status == ACTIVE and e.triple.subject == subject and e.triple.relation == relation
        ]

    def check_integrity(self) -> None:
        assert len(self._by_key) == len(self.entries)
        seqs = [e.seq for e in self.entries]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs), "seq numbers not strictly increasing"
        stamps = [e.timestamp for e in self.entries]
        assert stamps == sorted(stamps), "timestamps out of log order"


# -- the three verbs ----------------------------------------------------------


def edit(
    m: SimulatedModel,
    cache: EditCache,
    t: Triple,
    user: str,
    extra_noise_rate: Fraction = Fraction(0),
    request_id: Optional[int] = None,
    source: str = "raw",
    clear_others: bool = False,
) -> str:
    """Apply one edit through the configured backend; returns its cache key.

    With clear_others (Controller-resolved writes to functional keys) the
    delta also zeroes every other positive answer at the edited key, so the
    displaced object's weight lands on exactly 0 and comes back exactly on
    rollback. Bare edits instead leave the old top with its rho-fraction
    residual.
    """
    seq = cache.next_seq()
    key = make_key(seq, t, user)
    qk = t.key()

    if m.config.backend == CODEBOOK:
        delta = EditDelta(backend=CODEBOOK, override=(qk, t.object))
    else:
        adjustments = [Adjustment(qk, t.object, Fraction(1))]
        if clear_others:
            for ans, w in sorted(m.scores.get(qk, {}).items()):
                if ans != t.object and w > 0:
                    adjustments.append(Adjustment(qk, ans, -w))
        else:
            top = m.top_scored(qk)
            if top is not None and top[0] != t.object:
                old_ans, old_w = top
                reduction = (Fraction(1) - m.config.rho) * old_w
                if reduction != 0:
                    adjustments.append(Adjustment(qk, old_ans, -reduction))
        noise: list[Adjustment] = []
        rate = min(Fraction(1), m.config.noise_rate + extra_noise_rate)
        if rate > 0 and m.rng.random() < rate:
            candidates = sorted(k for k in m.scores.keys() if k != qk and m.top_scored(k) is not None)
            if candidates:
                target = candidates[m.rng.randrange(len(candidates))]
                tgt_ans, _w = m.top_scored(target)
                sign = 1 if m.rng.random() < Fraction(1, 2) else -1
                noise.append(Adjustment(target, tgt_ans, sign * m.config.delta))
        delta = EditDelta(backend=DIRECT, adjustments=tuple(adjustments), noise=tuple(noise))

    m.apply_delta(key, delta)
    cache.append(
        CacheEntry(
            key=key,
            seq=seq,
            triple=t,
            user=user,
            timestamp=cache.tick(),
            delta=delta,
            request_id=request_id,
            source=source,
        )
    )
    return key


def rollback(m: SimulatedModel, cache: EditCache, key: str) -> CacheEntry:
    """Exactly undo one active edit; raises KeyNotActive otherwise."""
    entry = cache.mark_rolled_back(key)
    m.subtract_delta(key, entry.delta)
    cache.tick()
    return entry


def query(m: SimulatedModel, subject: str, relation: str) -> Optional[QueryResult]:
    return m.query(subject, relation)


# -- NDJSON log form ----------------------------------------------------------


def edit_record(entry: CacheEntry, rng_after: tuple) -> dict:
    return {
        "type": "edit",
        "key": entry.key,
        "seq": entry.seq,
        "triple": entry.triple.as_dict(),
        "user": entry.user,
        "timestamp": entry.timestamp,
        "delta": entry.delta.as_json(),
        "request_id": entry.request_id,
        "source": entry.source,
        "rng_after": _rng_state_json(rng_after),
    }


def rollback_record(key: str, timestamp: int) -> dict:
    return {"type": "rollback", "key": key, "timestamp": timestamp}


def _rng_state_json(state: tuple) -> list:
    version, internal, gauss = state
    return [version, list(internal), gauss]


def _rng_state_from_json(row: list) -> tuple:
    version, internal, gauss = row
    return (version, tuple(internal), gauss)


def replay_log_records(records: Iterable[dict], m: SimulatedModel, cache: EditCache) -> None:
    """Rebuild model + cache state from log records, exactly as recorded.

    Deltas are re-applied from their stored adjustments — never recomputed —
    so recorded noise lands identically. The model's RNG resumes from the
    last edit's saved state.
    """
    last_rng = None
    for rec in records:
        if rec["type"] == "edit":
            entry = CacheEntry(
                key=rec["key"],
                seq=rec["seq"],
                triple=Triple.from_dict(rec["triple"]),
                user=rec["user"],
                timestamp=rec["timestamp"],
                delta=EditDelta.from_json(rec["delta"]),
                request_id=rec.get("request_id"),
                source=rec.get("source", "raw"),
            )
            m.apply_delta(entry.key, entry.delta)
            cache.append(entry)
            if rec.get("rng_after") is not None:
                last_rng = rec["rng_after"]
        elif rec["type"] == "rollback":
            entry = cache.mark_rolled_back(rec["key"])
            m.subtract_delta(entry.key, entry.delta)
            cache._clock = max(cache._clock, rec["timestamp"])
        else:
            raise ValueError(f"unknown cache log record type {rec.get('type')!r}")
    if last_rng is not None:
        m.rng.setstate(_rng_state_from_json(last_rng))


def load_cache_log(path: str) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
