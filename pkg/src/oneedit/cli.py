"""Command line front door: repl, serve, eval, sweep, fixture.

Exit codes: 0 success, 1 usage error, 2 fixture/config error,
3 scenario assertion failure.
"""

from __future__ import annotations

import json
import os
import sys
from typing import Optional

import click

from . import editor as editor_mod
from .controller import Controller
from .editor import EditCache, SimulatedModel
from .errors import (
    BadRule, BadSchema, FixtureError, InfeasibleFixture, OneEditError,
    ScenarioAssertionError, UnknownRelation, UnresolvableRollback,
)
from .fixtures import FixtureSizes, check_fixture, generate_fixture
from .interpreter import interpret
from .kg import load_kg
from .rules import load_rules
from .scenario import RunConfig, load_aliases, load_scenario, run_scenario, sweep_augmentation
from .service import ServicePaths, SessionState, build_app, question_answer
from .triples import load_schemas

_CONFIG_FLAG_NAMES = (
    "backend", "augment_n", "rho", "delta", "noise_rate", "seed", "strict",
)


@click.group()
@click.option("--kg", "kg_path", type=click.Path(), help="Knowledge graph NDJSON file.")
@click.option("--schema", "schema_path", type=click.Path(), help="Relation schema JSON file.")
@click.option("--rules", "rules_path", type=click.Path(), help="Logical rules file.")
@click.option("--aliases", "aliases_path", type=click.Path(), help="Entity alias table JSON file.")
@click.option("--backend", type=click.Choice(["direct", "codebook"]), help="Simulated editing backend.")
@click.option("--augment-n", type=int, help="Knowledge augmentation budget per edit.")
@click.option("--rho", help="Residual weight factor kept by a superseded answer (fraction or decimal).")
@click.option("--delta", help="Noise magnitude for the direct backend.")
@click.option("--noise-rate", help="Probability of a noise draw per direct-backend edit.")
@click.option("--seed", type=int, help="RNG seed for the model.")
@click.option("--strict/--no-strict", default=None, help="Refuse edits whose conflicts lack a rollback key.")
@click.pass_context
def cli(ctx, **flags):
    """Neural-symbolic single-fact editing toolkit."""
    ctx.obj = flags


def _flag_overrides(obj: dict) -> dict:
    out = {}
    for name in _CONFIG_FLAG_NAMES:
        value = obj.get(name)
        if value is not None:
            out[name] = value
    return out


def _config_from_flags(obj: dict, base: Optional[RunConfig] = None) -> RunConfig:
    cfg = base or RunConfig()
    overrides = _flag_overrides(obj)
    return cfg.override(**overrides) if overrides else cfg


def _require(obj: dict, name: str) -> str:
    value = obj.get(f"{name}_path")
    if not value:
        raise click.UsageError(f"--{name} is required for this command")
    return value


def _load_session(obj: dict):
    schemas = load_schemas(_require(obj, "schema"))
    g = load_kg(_require(obj, "kg"), schemas)
    rules = load_rules(obj["rules_path"]) if obj.get("rules_path") else []
    aliases = load_aliases(obj["aliases_path"]) if obj.get("aliases_path") else {}
    cfg = _config_from_flags(obj)
    m = SimulatedModel.from_kg(g, cfg.model_config())
    cache = EditCache()
    controller = Controller(g, m, cache, rules=rules, aliases=aliases, cfg=cfg.controller_config())
    return schemas, g, m, cache, controller, cfg


@cli.command()
@click.option("--user", default="repl", show_default=True, help="Attribution for edits made in this session.")
@click.pass_context
def repl(ctx, user):
    """Interactive editing loop over local fixture files.

    Plain lines go through the interpreter. Meta commands:
    :query <subject> | <relation>, :rollback <key>, :history, :quit.
    """
    schemas, g, m, cache, controller, _cfg = _load_session(ctx.obj)
    click.echo(f"loaded {len(g)} triples, {len(schemas.names())} relations. :quit to exit.")
    while True:
        try:
            line = input("edit> ").strip()
        except (EOFError, KeyboardInterrupt):
            click.echo("")
            break
        if not line:
            continue
        if line in (":quit", ":q"):
            break
        if line == ":history":
            for e in cache.entries:
                click.echo(f"  {e.key}  {e.status:<10}  {e.triple.subject} {e.triple.relation} {e.triple.object}")
            continue
        if line.startswith(":rollback "):
            key = line.split(None, 1)[1].strip()
            try:
                entry = editor_mod.rollback(m, cache, key)
                if entry.source != "alias":
                    g.remove(entry.triple)
                click.echo(f"rolled back {key}")
            except OneEditError as e:
                click.echo(f"error: {e}")
            continue
        if line.startswith(":query "):
            body = line.split(None, 1)[1]
            if "|" not in body:
                click.echo("usage: :query <subject> | <relation>")
                continue
            s, r = (part.strip() for part in body.split("|", 1))
            res = m.query(s, r)
            click.echo(f"  {res.answer} (weight {res.weight})" if res else "  no answer")
            continue
        intent = interpret(line, schemas)
        if not intent.is_edit:
            answer = question_answer(line, m)
            click.echo(f"  [generate] {answer['answer']}" if answer else f"  [generate] {intent.text}")
            continue
        try:
            receipt = controller.handle(intent.triple, user)
        except (UnresolvableRollback, UnknownRelation) as e:
            click.echo(f"rejected: {e}")
            continue
        plan = receipt.plan
        kind = plan.conflict.kind if plan.conflict else "None"
        click.echo(
            f"  conflict={kind} rollbacks={len(plan.rollbacks)} "
            f"edits={len(plan.edits) + len(plan.alias_edits)} augmentations={len(plan.augmentations)}"
        )
        for key in receipt.new_keys():
            click.echo(f"  + {key}")


@cli.command()
@click.option("--port", default=8787, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--state-dir", type=click.Path(), default=None,
              help="Where the cache/audit logs live; defaults to <kg dir>/state.")
@click.pass_context
def serve(ctx, port, host, state_dir):
    """Run the HTTP editing service."""
    import uvicorn

    kg_path = _require(ctx.obj, "kg")
    schema_path = _require(ctx.obj, "schema")
    if state_dir is None:
        state_dir = os.path.join(os.path.dirname(os.path.abspath(kg_path)), "state")
    paths = ServicePaths(
        kg=kg_path, schema=schema_path,
        rules=ctx.obj.get("rules_path"), aliases=ctx.obj.get("aliases_path"),
        state_dir=state_dir,
    )
    state = SessionState(paths, _config_from_flags(ctx.obj))
    app = build_app(state)
    click.echo(f"serving on http://{host}:{port} (state in {state_dir})")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        state.close()


@cli.command("eval")
@click.option("--scenario", "scenario_path", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for report.json and report.csv.")
@click.option("--controller/--no-controller", "use_controller", default=None,
              help="Override the scenario's controller setting.")
@click.option("--method", default=None, help="Method label for the report row.")
@click.pass_context
def eval_cmd(ctx, scenario_path, out_dir, use_controller, method):
    """Run a scripted scenario and report the five metrics."""
    scenario = load_scenario(scenario_path)
    cfg = _config_from_flags(ctx.obj, scenario.config)
    if use_controller is not None:
        cfg = cfg.override(use_controller=use_controller)
    if method is not None:
        cfg = cfg.override(method=method)
    result = run_scenario(scenario, cfg)
    click.echo(result.report.csv_text(), nl=False)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(result.report.json_text())
        with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8") as fh:
            fh.write(result.report.csv_text())
    result.check_assertions()


@cli.command()
@click.option("--scenario", "scenario_path", type=click.Path(), required=True)
@click.option("--n", "n_values", default="0,2,4,8,16,32", show_default=True,
              help="Comma-separated augmentation budgets, ascending.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for sweep.json and sweep.csv.")
@click.option("--controller/--no-controller", "use_controller", default=None)
@click.pass_context
def sweep(ctx, scenario_path, n_values, out_dir, use_controller):
    """Re-run one scenario across augmentation budgets."""
    try:
        values = [int(x) for x in n_values.split(",") if x.strip() != ""]
    except ValueError:
        raise click.UsageError(f"--n must be comma-separated integers, got {n_values!r}")
    if not values or values != sorted(values):
        raise click.UsageError("--n values must be non-empty and ascending")
    scenario = load_scenario(scenario_path)
    cfg = _config_from_flags(ctx.obj, scenario.config)
    if use_controller is not None:
        cfg = cfg.override(use_controller=use_controller)
    result = sweep_augmentation(scenario, values, cfg)
    click.echo(result.table_text(), nl=False)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.json"), "w", encoding="utf-8") as fh:
            fh.write(result.json_text())
        with open(os.path.join(out_dir, "sweep.csv"), "w", encoding="utf-8") as fh:
            fh.write(result.table_text())


@cli.command()
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--subjects", default=20, show_default=True, type=int)
@click.option("--locality-cases", default=200, show_default=True, type=int)
@click.option("--rules", "rule_count", default=2, show_default=True, type=int)
@click.option("--users", default=3, show_default=True, type=int)
def fixture(seed, out_dir, subjects, locality_cases, rule_count, users):
    """Generate a self-consistent fixture world and validate it."""
    sizes = FixtureSizes(
        subjects=subjects, locality_cases=locality_cases, rules=rule_count, users=users,
    )
    fx = generate_fixture(seed, out_dir, sizes)
    check_fixture(out_dir)
    with open(fx.files["manifest"], "r", encoding="utf-8") as fh:
        click.echo(fh.read(), nl=False)


def entrypoint(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        click.echo(f"error: {e.format_message()}", err=True)
        return 1
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        return 130
    except ScenarioAssertionError as e:
        click.echo(f"assertion failure: {e}", err=True)
        return 3
    except (FixtureError, InfeasibleFixture, BadSchema, BadRule, OSError, json.JSONDecodeError) as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except OneEditError as e:
        click.echo(f"error: {e}", err=True)
        return 2


def main() -> None:
    sys.exit(entrypoint())


if __name__ == "__main__":
    main()
