"""Seeded fixture worlds: graph, schemas, rules, aliases, scripts, eval suites.

One fixture is a little org-chart universe. Every subject S has a head A
(reversible: A is head_of S), every head candidate has a deputy, and a
rule says the head's deputy is the subject's second-in-command:

    head(X, Y) & deputy(Y, Z) -> second(X, Z)

Scripted edits replace each subject's head; the eval suites then probe the
edit itself (reliability), the untouched motto facts (locality), the
inverse direction (reverse), the rule consequence (one_hop), and the
subject's alias (sub_replace). Everything is generated from one RNG seed
and cross-checked by check_fixture, so a suite can never ask for an answer
the world does not support.

Subjects get different numbers of 'ally' filler edges on purpose: the
fillers sit in BFS layer 1 and compete with the rule-derived triple for
the augmentation budget, which is what makes accuracy climb with n.
Replacement heads carry an ally shell of their own one hop deeper; those
edges never compete with the rule triple (they rank after it), but they
keep feeding the budget at large n, so big-n batches on the direct
backend really are bigger — and noisier — than mid-n ones.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field

from .errors import FixtureError, InfeasibleFixture
from .interpreter import interpret, render_dsl
from .kg import KnowledgeGraph, dump_kg, load_kg
from .metrics import (
    EvalCase, LOCALITY, ONE_HOP, RELIABILITY, REVERSE, SUB_REPLACE, dump_cases, load_cases,
)
from .rules import load_rules, parse_rules, rule_closure
from .triples import RelationSchema, SchemaRegistry, Triple, dump_schemas, load_schemas

# filler degrees cycle through this multiset; shuffled per seed across
# subjects, the multiset itself is fixed so budget sweeps keep their shape
_DEGREE_PATTERN = [0, 0, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 9, 12]

# every replacement head gets this many layer-2 ally edges
_SHELL_DEGREE = 16

_RULE_TEXTS = [
    "head(X, Y) & deputy(Y, Z) -> second(X, Z)",
    "deputy(X, Y) -> aide_of(Y, X)",
]

FILES = {
    "kg": "kg.jsonl",
    "schema": "schema.json",
    "rules": "rules.txt",
    "aliases": "aliases.json",
    "cases_single": "cases_single.jsonl",
    "cases_multi2": "cases_multi2.jsonl",
    "cases_multi3": "cases_multi3.jsonl",
    "single_user": "single_user.json",
    "multi_user_2": "multi_user_2.json",
    "multi_user_3": "multi_user_3.json",
    "manifest": "fixture.json",
}


@dataclass(frozen=True)
class FixtureSizes:
    subjects: int = 20
    locality_cases: int = 200
    rules: int = 2
    users: int = 3

    def check(self) -> None:
        if not 1 <= self.subjects <= 99:
            raise InfeasibleFixture(f"subjects must be 1..99, got {self.subjects}")
        if not 0 <= self.locality_cases <= 999:
            raise InfeasibleFixture(f"locality_cases must be 0..999, got {self.locality_cases}")
        if self.rules < 1:
            raise InfeasibleFixture("one-hop eval cases need at least one rule; rules=0 is unsatisfiable")
        if self.rules > len(_RULE_TEXTS):
            raise InfeasibleFixture(f"at most {len(_RULE_TEXTS)} rules available, got {self.rules}")
        if self.users not in (1, 2, 3):
            raise InfeasibleFixture(f"users must be 1, 2, or 3, got {self.users}")


def _schemas() -> SchemaRegistry:
    return SchemaRegistry(
        [
            RelationSchema("head", reversible=True, inverse="head_of", functional=True),
            RelationSchema("head_of", reversible=True, inverse="head", functional=True),
            RelationSchema("deputy", functional=True),
            RelationSchema("second", functional=True),
            RelationSchema("aide_of", functional=True),
            RelationSchema("ally", functional=False),
            RelationSchema("motto", functional=True),
        ]
    )


def _utterance_for(rng: random.Random, t: Triple) -> str:
    variant = rng.randrange(4)
    if variant == 0:
        return render_dsl(t)
    if variant == 1:
        return f"Change the {t.relation} of {t.subject} to {t.object}"
    if variant == 2:
        return f"Set {t.subject} {t.relation} to {t.object}"
    return f"Edit: {t.subject}'s {t.relation} is {t.object}"


@dataclass
class Fixture:
    seed: int
    sizes: FixtureSizes
    out_dir: str
    files: dict[str, str] = field(default_factory=dict)


def generate_fixture(seed: int, out_dir: str, sizes: FixtureSizes = FixtureSizes()) -> Fixture:
    """Write a full fixture directory; returns the manifest description."""
    sizes.check()
    rng = random.Random(seed)
    os.makedirs(out_dir, exist_ok=True)

    schemas = _schemas()
    g = KnowledgeGraph(schemas)

    degrees = [_DEGREE_PATTERN[i % len(_DEGREE_PATTERN)] for i in range(sizes.subjects)]
    rng.shuffle(degrees)

    aliases: dict[str, list[str]] = {}
    new_objects: dict[int, dict[str, str]] = {}

    for i in range(sizes.subjects):
        s, a = f"S{i:02d}", f"A{i:02d}"
        per_user = {"u1": f"B{i:02d}", "u2": f"C{i:02d}", "u3": f"D{i:02d}"}
        new_objects[i] = per_user
        g.upsert_triple(Triple.of(s, "head", a))
        g.upsert_triple(Triple.of(a, "head_of", s))
        g.upsert_triple(Triple.of(a, "deputy", f"ZA{i:02d}"))
        g.upsert_triple(Triple.of(s, "second", f"ZA{i:02d}"))
        for user_idx, (_user, obj) in enumerate(sorted(per_user.items())):
            if user_idx < sizes.users:
                g.upsert_triple(Triple.of(obj, "deputy", f"Z{obj}"))
                for j in range(_SHELL_DEGREE):
                    g.upsert_triple(Triple.of(obj, "ally", f"P{obj}_{j}"))
        for j in range(degrees[i]):
            g.upsert_triple(Triple.of(s, "ally", f"N{i:02d}_{j}"))
        aliases[s] = [f"{s}x"]

    for k in range(sizes.locality_cases):
        g.upsert_triple(Triple.of(f"F{k:03d}", "motto", f"G{k:03d}"))

    rules_text = "# derived knowledge\n" + "\n".join(_RULE_TEXTS[: sizes.rules]) + "\n"

    # scripts: one pass per user, each pass re-edits every subject's head
    def steps_for(users: int) -> list[dict]:
        steps = []
        for u in range(1, users + 1):
            user = f"u{u}"
            for i in range(sizes.subjects):
                t = Triple.of(f"S{i:02d}", "head", new_objects[i][user])
                steps.append({"user": user, "utterance": _utterance_for(rng, t)})
        return steps

    def cases_for(user: str) -> list[EvalCase]:
        cases = []
        for i in range(sizes.subjects):
            s = f"S{i:02d}"
            obj = new_objects[i][user]
            cases.append(EvalCase(s, "head", RELIABILITY, expected=obj))
            cases.append(EvalCase(obj, "head_of", REVERSE, expected=s))
            cases.append(EvalCase(s, "second", ONE_HOP, expected=f"Z{obj}"))
            cases.append(EvalCase(f"{s}x", "head", SUB_REPLACE, expected=obj))
        for k in range(sizes.locality_cases):
            cases.append(
                EvalCase(f"F{k:03d}", "motto", LOCALITY, pre_edit_expected=f"G{k:03d}")
            )
        return cases

    base_config = {
        "backend": "codebook",
        "use_controller": True,
        "augment_n": 8,
        "rule_depth": 2,
        "rules_enabled": True,
        "alias_expansion": True,
        "strict": False,
        "rho": "1/2",
        "delta": "1",
        "noise_rate": "1/5",
        "noise_batch_scale": "1/10",
        "seed": seed,
    }

    fixture_refs = {
        "kg": FILES["kg"],
        "schema": FILES["schema"],
        "rules": FILES["rules"],
        "aliases": FILES["aliases"],
    }

    scenarios = {
        FILES["single_user"]: {
            "name": "single_user",
            "users": 1,
            "steps": steps_for(1),
            "config": dict(base_config),
            "fixtures": {**fixture_refs, "cases": FILES["cases_single"]},
        },
    }
    if sizes.users >= 2:
        scenarios[FILES["multi_user_2"]] = {
            "name": "multi_user_2",
            "users": 2,
            "steps": steps_for(2),
            "config": dict(base_config),
            "fixtures": {**fixture_refs, "cases": FILES["cases_multi2"]},
        }
    if sizes.users >= 3:
        scenarios[FILES["multi_user_3"]] = {
            "name": "multi_user_3",
            "users": 3,
            "steps": steps_for(3),
            "config": dict(base_config),
            "fixtures": {**fixture_refs, "cases": FILES["cases_multi3"]},
        }

    # everything is built; now write files
    dump_schemas(schemas, os.path.join(out_dir, FILES["schema"]))
    dump_kg(g, os.path.join(out_dir, FILES["kg"]))
    with open(os.path.join(out_dir, FILES["rules"]), "w", encoding="utf-8") as fh:
        fh.write(rules_text)
    with open(os.path.join(out_dir, FILES["aliases"]), "w", encoding="utf-8") as fh:
        json.dump(aliases, fh, indent=2, sort_keys=True)
        fh.write("\n")
    dump_cases(cases_for("u1"), os.path.join(out_dir, FILES["cases_single"]))
    if sizes.users >= 2:
        dump_cases(cases_for("u2"), os.path.join(out_dir, FILES["cases_multi2"]))
    if sizes.users >= 3:
        dump_cases(cases_for("u3"), os.path.join(out_dir, FILES["cases_multi3"]))
    for fname, doc in scenarios.items():
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    fixture = Fixture(
        seed=seed, sizes=sizes, out_dir=out_dir,
        files={k: os.path.join(out_dir, v) for k, v in FILES.items()},
    )
    manifest = {
        "seed": seed,
        "sizes": {
            "subjects": sizes.subjects,
            "locality_cases": sizes.locality_cases,
            "rules": sizes.rules,
            "users": sizes.users,
        },
        "files": dict(FILES),
        "triples": len(g),
        "relations": schemas.names(),
    }
    with open(os.path.join(out_dir, FILES["manifest"]), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    check_fixture(out_dir)
    return fixture


# -- consistency validation ----------------------------------------------------


def _final_edits(scenario_doc: dict, schemas: SchemaRegistry) -> dict[tuple[str, str], str]:
    """Last edited object per (subject, relation), read back from the script."""
    final: dict[tuple[str, str], str] = {}
    for step in scenario_doc["steps"]:
        intent = interpret(step["utterance"], schemas)
        if not intent.is_edit:
            raise FixtureError(f"script step is not an edit: {step['utterance']!r}")
        t = intent.triple
        final[(t.subject, t.relation)] = t.object
    return final


def check_fixture(fixture_dir: str) -> None:
    """Cross-check every suite answer against the world that must produce it.

    Raises FixtureError on the first inconsistency. This is deliberately
    an independent reading of the files — it parses the scripts back
    through the interpreter rather than trusting the generator's loops.
    """
    path = lambda name: os.path.join(fixture_dir, FILES[name])
    schemas = load_schemas(path("schema"))
    schemas.validate()
    g = load_kg(path("kg"), schemas)
    g.check_integrity()
    rules = load_rules(path("rules"))
    with open(path("aliases"), "r", encoding="utf-8") as fh:
        aliases = json.load(fh)
    alias_to_entity = {a: e for e, al in aliases.items() for a in al}

    # seed graph keeps inverse closure for reversible relations
    for t in g.triples():
        inv = schemas.inverse_of(t.relation)
        if inv is not None:
            twin = Triple(t.object, inv, t.subject)
            if twin not in g:
                raise FixtureError(f"graph misses inverse twin of {t}")

    suites = {
        "cases_single": "single_user",
        "cases_multi2": "multi_user_2",
        "cases_multi3": "multi_user_3",
    }
    for cases_name, scenario_name in suites.items():
        if not os.path.exists(path(cases_name)):
            continue
        with open(path(scenario_name), "r", encoding="utf-8") as fh:
            scenario_doc = json.load(fh)
        final = _final_edits(scenario_doc, schemas)
        cases = load_cases(path(cases_name))
        edited_subjects = {s for (s, _r) in final}
        for c in cases:
            if c.category == RELIABILITY:
                if final.get((c.subject, c.relation)) != c.expected:
                    raise FixtureError(f"reliability case not produced by script: {c}")
            elif c.category == REVERSE:
                inv = schemas.inverse_of(c.relation)
                if inv is None:
                    raise FixtureError(f"reverse case on non-reversible relation: {c}")
                if final.get((c.expected, inv)) != c.subject:
                    raise FixtureError(f"reverse case not implied by script: {c}")
            elif c.category == ONE_HOP:
                seeds = [Triple.of(s, r, o) for (s, r), o in final.items()]
                derived = rule_closure(g, rules, seeds=seeds, max_depth=2)
                hits = [t for t in derived if (t.subject, t.relation) == (c.subject, c.relation)]
                if [t.object for t in hits] != [c.expected]:
                    raise FixtureError(f"one_hop case not derivable by exactly one rule: {c}")
            elif c.category == SUB_REPLACE:
                entity = alias_to_entity.get(c.subject)
                if entity is None:
                    raise FixtureError(f"sub_replace case subject not in alias table: {c}")
                if final.get((entity, c.relation)) != c.expected:
                    raise FixtureError(f"sub_replace case not implied by script: {c}")
            elif c.category == LOCALITY:
                if c.pre_edit_expected not in g.lookup(c.subject, c.relation):
                    raise FixtureError(f"locality case answer missing from seed graph: {c}")
                if c.subject in edited_subjects:
                    raise FixtureError(f"locality case subject is edited by the script: {c}")
            else:
                raise FixtureError(f"unknown case category: {c}")
