"""Single-edit knowledge updating over a simulated model and a KG twin.

The package splits along the data path an utterance takes:

- ``interpreter``   utterance -> edit intent or generate passthrough
- ``controller``    intent -> plan (rollbacks, twin edits, augmentations)
- ``editor``        plan items -> exact score deltas + append-only cache
- ``kg`` / ``rules``  the symbolic graph, BFS neighborhoods, rule closure
- ``metrics``       five-way evaluation with exact rational scores
- ``scenario``      scripted runs, config sweeps, fixture-driven sessions
- ``fixtures``      seeded world generator + independent validator
- ``service``       HTTP facade with single-writer persistence
"""

from .controller import (
    AugmentConfig,
    ConflictReport,
    Controller,
    ControllerConfig,
    EditPlan,
    Receipt,
    detect_coverage_conflict,
    detect_reverse_conflict,
)
from .editor import (
    EditCache,
    EditDelta,
    ModelConfig,
    SimulatedModel,
    edit,
    rollback,
)
from .errors import OneEditError
from .interpreter import Intent, interpret, render_dsl
from .kg import KnowledgeGraph, load_kg
from .metrics import MetricsReport, build_report, fmt3
from .rules import LogicalRule, parse_rule, rule_closure
from .scenario import RunConfig, Scenario, load_scenario, run_scenario, sweep_augmentation
from .triples import RelationSchema, SchemaRegistry, Triple, load_schemas

__version__ = "0.4.1"

__all__ = [
    "AugmentConfig",
    "ConflictReport",
    "Controller",
    "ControllerConfig",
    "EditCache",
    "EditDelta",
    "EditPlan",
    "Intent",
    "KnowledgeGraph",
    "LogicalRule",
    "MetricsReport",
    "ModelConfig",
    "OneEditError",
    "Receipt",
    "RelationSchema",
    "RunConfig",
    "Scenario",
    "SchemaRegistry",
    "SimulatedModel",
    "Triple",
    "build_report",
    "detect_coverage_conflict",
    "detect_reverse_conflict",
    "edit",
    "fmt3",
    "interpret",
    "load_kg",
    "load_scenario",
    "load_schemas",
    "parse_rule",
    "render_dsl",
    "rollback",
    "rule_closure",
    "run_scenario",
    "sweep_augmentation",
    "__version__",
]
