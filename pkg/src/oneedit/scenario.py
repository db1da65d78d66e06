"""Scenario scripts: load, run, and sweep.

A scenario file is JSON: named fixture files (graph, schemas, rules,
aliases, eval cases), a list of steps (user + utterance or raw triple),
and a run config. Running one is the whole pipeline end to end:
interpret each utterance, route edits through the controller (or straight
to the model when the controller is disabled for ablation), then score
the eval suite against the pre-edit snapshot. Same seed, same bytes out.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

from . import editor as editor_mod
from .controller import AugmentConfig, Controller, ControllerConfig, Receipt
from .editor import EditCache, ModelConfig, SimulatedModel, as_fraction
from .errors import FixtureError, ScenarioAssertionError, OneEditError
from .interpreter import Intent, interpret
from .kg import KnowledgeGraph, load_kg
from .metrics import EvalCase, MetricsReport, build_report, load_cases
from .rules import LogicalRule, load_rules
from .triples import SchemaRegistry, Triple, load_schemas


class ScenarioStepError(OneEditError):
    def __init__(self, step_index: int, cause: Exception):
        super().__init__(f"step {step_index}: {cause}")
        self.step_index = step_index
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    backend: str = "codebook"
    use_controller: bool = True
    augment_n: int = 8
    rule_depth: int = 2
    rules_enabled: bool = True
    alias_expansion: bool = True
    strict: bool = False
    rho: Fraction = Fraction(1, 2)
    delta: Fraction = Fraction(1, 10)
    noise_rate: Fraction = Fraction(1, 5)
    noise_batch_scale: Fraction = Fraction(1, 50)
    seed: int = 0
    method: Optional[str] = None

    @property
    def method_label(self) -> str:
        if self.method:
            return self.method
        return self.backend + ("+controller" if self.use_controller else "")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            backend=self.backend,
            rho=self.rho,
            delta=self.delta,
            noise_rate=self.noise_rate,
            seed=self.seed,
        )

    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(
            augment=AugmentConfig(
                n=self.augment_n, rule_depth=self.rule_depth, rules_enabled=self.rules_enabled
            ),
            alias_expansion=self.alias_expansion,
            strict=self.strict,
            noise_batch_scale=self.noise_batch_scale,
        )

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        kwargs = {}
        for name in (
            "backend", "use_controller", "augment_n", "rule_depth", "rules_enabled",
            "alias_expansion", "strict", "seed", "method",
        ):
            if name in d:
                kwargs[name] = d[name]
        for name in ("rho", "delta", "noise_rate", "noise_batch_scale"):
            if name in d:
                kwargs[name] = as_fraction(d[name])
        return RunConfig(**kwargs)

    def override(self, **kwargs) -> "RunConfig":
        for name in ("rho", "delta", "noise_rate", "noise_batch_scale"):
            if name in kwargs:
                kwargs[name] = as_fraction(kwargs[name])
        return replace(self, **kwargs)


@dataclass(frozen=True)
class Step:
    user: str
    utterance: Optional[str] = None
    triple: Optional[Triple] = None

    @staticmethod
    def from_dict(d: dict) -> "Step":
        t = Triple.from_dict(d["triple"]) if "triple" in d else None
        return Step(user=d.get("user", "cli"), utterance=d.get("utterance"), triple=t)


@dataclass
class Scenario:
    name: str
    steps: list[Step]
    config: RunConfig
    fixtures: dict[str, str]  # kg/schema/rules/aliases/cases -> resolved paths
    assertions: dict = field(default_factory=dict)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise FixtureError(f"cannot read scenario {path}: {e}") from e
    base = os.path.dirname(os.path.abspath(path))
    fixtures = {}
    for kind, rel in raw.get("fixtures", {}).items():
        fixtures[kind] = rel if os.path.isabs(rel) else os.path.join(base, rel)
    try:
        steps = [Step.from_dict(d) for d in raw["steps"]]
        config = RunConfig.from_dict(raw.get("config", {}))
    except (KeyError, TypeError, ValueError) as e:
        raise FixtureError(f"malformed scenario {path}: {e}") from e
    return Scenario(
        name=raw.get("name", os.path.basename(path)),
        steps=steps,
        config=config,
        fixtures=fixtures,
        assertions=raw.get("assertions", {}),
    )


def load_aliases(path: str) -> dict[str, list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise FixtureError(f"{path}: alias table must be a JSON object")
    return {k: list(v) for k, v in raw.items()}


@dataclass
class Session:
    """Everything one scenario run owns."""

    schemas: SchemaRegistry
    g: KnowledgeGraph
    m: SimulatedModel
    cache: EditCache
    controller: Controller
    rules: list[LogicalRule]
    aliases: dict[str, list[str]]
    cases: list[EvalCase]
    config: RunConfig


def build_session(scenario: Scenario, config: Optional[RunConfig] = None) -> Session:
    cfg = config or scenario.config
    fx = scenario.fixtures
    for required in ("kg", "schema"):
        if required not in fx:
            raise FixtureError(f"scenario {scenario.name} names no {required} fixture")
    try:
        schemas = load_schemas(fx["schema"])
        g = load_kg(fx["kg"], schemas)
        rules = load_rules(fx["rules"]) if "rules" in fx else []
        aliases = load_aliases(fx["aliases"]) if "aliases" in fx else {}
        cases = load_cases(fx["cases"]) if "cases" in fx else []
    except OSError as e:
        raise FixtureError(f"cannot read fixture file: {e}") from e
    m = SimulatedModel.from_kg(g, cfg.model_config())
    cache = EditCache()
    controller = Controller(g, m, cache, rules=rules, aliases=aliases, cfg=cfg.controller_config())
    return Session(
        schemas=schemas, g=g, m=m, cache=cache, controller=controller,
        rules=rules, aliases=aliases, cases=cases, config=cfg,
    )


@dataclass
class RunResult:
    scenario: Scenario
    session: Session
    pre_model: SimulatedModel
    report: MetricsReport
    receipts: list[Receipt]
    generates: list[str]

    def check_assertions(self) -> None:
        problems = []
        for metric_name, bounds in self.scenario.assertions.items():
            value = self.report.metric(metric_name).value
            lo = bounds.get("min")
            hi = bounds.get("max")
            if lo is not None and value < as_fraction(lo):
                problems.append(f"{metric_name}={float(value):.3f} below min {lo}")
            if hi is not None and value > as_fraction(hi):
                problems.append(f"{metric_name}={float(value):.3f} above max {hi}")
        if problems:
            raise ScenarioAssertionError("; ".join(problems))


def apply_step(session: Session, step: Step, request_id: Optional[int] = None):
    """Run one step through interpret + controller (or raw editor).

    Returns a Receipt for edits, or the passthrough text for generates.
    """
    if step.triple is not None:
        intent = Intent.edit(step.triple)
    else:
        intent = interpret(step.utterance or "", session.schemas)
    if not intent.is_edit:
        return intent.text
    if session.config.use_controller:
        return session.controller.handle(intent.triple, step.user, request_id=request_id)
    # ablation path: the bare editor is graph-blind, the model alone changes
    editor_mod.edit(session.m, session.cache, intent.triple, step.user, request_id=request_id)
    return None


def run_scenario(
    scenario: Scenario,
    config: Optional[RunConfig] = None,
    steps_limit: Optional[int] = None,
) -> RunResult:
    cfg = config or scenario.config
    session = build_session(scenario, cfg)
    pre_model = SimulatedModel.restore(session.m.snapshot())

    receipts: list[Receipt] = []
    generates: list[str] = []
    steps = scenario.steps if steps_limit is None else scenario.steps[:steps_limit]
    for idx, step in enumerate(steps):
        try:
            out = apply_step(session, step, request_id=idx + 1)
        except Exception as e:
            raise ScenarioStepError(idx, e) from e
        if isinstance(out, Receipt):
            receipts.append(out)
        elif isinstance(out, str):
            generates.append(out)

    report = build_report(cfg.method_label, pre_model, session.m, session.cases)
    return RunResult(
        scenario=scenario, session=session, pre_model=pre_model,
        report=report, receipts=receipts, generates=generates,
    )


# -- augmentation budget sweep -------------------------------------------------


@dataclass
class SweepResult:
    n_values: list[int]
    reports: dict[int, MetricsReport]

    def one_hop_series(self) -> list[Fraction]:
        return [self.reports[n].one_hop.value for n in self.n_values]

    def as_json(self) -> dict:
        return {
            "n_values": self.n_values,
            "rows": [
                {"n": n, **self.reports[n].as_json()}
                for n in self.n_values
            ],
        }

    def json_text(self) -> str:
        return json.dumps(self.as_json(), sort_keys=True, indent=2) + "\n"

    def table_text(self) -> str:
        lines = ["n,One-Hop,Reliability,Locality,Reverse,Sub-Replace,Average"]
        from .metrics import fmt3

        for n in self.n_values:
            r = self.reports[n]
            lines.append(
                ",".join(
                    [
                        str(n),
                        fmt3(r.one_hop.value),
                        fmt3(r.reliability.value),
                        fmt3(r.locality.value),
                        fmt3(r.reverse.value),
                        fmt3(r.sub_replace.value),
                        fmt3(r.average),
                    ]
                )
            )
        return "\n".join(lines) + "\n"


def sweep_augmentation(
    scenario: Scenario, n_values: Sequence[int], config: Optional[RunConfig] = None
) -> SweepResult:
    """Run the same script once per augmentation budget, fresh state each time."""
    cfg = config or scenario.config
    reports = {}
    for n in n_values:
        result = run_scenario(scenario, cfg.override(augment_n=n))
        reports[n] = result.report
    return SweepResult(n_values=list(n_values), reports=reports)
