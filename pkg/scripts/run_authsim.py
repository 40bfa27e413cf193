#!/usr/bin/env python3
"""
Channel-attribute authentication simulator CLI

Thin wrapper over `authsim.harness` and `authsim.report`.

USAGE:
    # Full run: sessions, ongoing access, FAR/FRR, fleet costs
    python scripts/run_authsim.py run scenarios/default.json --out out/default

    # Override the scenario seed (also: AUTHSIM_SEED env var, lowest priority)
    python scripts/run_authsim.py run scenarios/default.json --out out/s7 --seed 7

    # Only the proposed-vs-PUF fleet cost table
    python scripts/run_authsim.py compare-baseline scenarios/default.json --out out/costs

    # Check a scenario file without running it
    python scripts/run_authsim.py validate scenarios/default.json

    # Known-answer checks (hash vector, PRBS15 period, SVM closed form)
    python scripts/run_authsim.py selftest

    # JSON Schema of the scenario format
    python scripts/run_authsim.py schema

EXIT CODES:
    0 success, 2 invalid scenario (parse/schema/missing file), 3 runtime error
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Optional

# Ensure project root is on PYTHONPATH so we can import authsim/*
HERE = Path(__file__).resolve()
ROOT = HERE.parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import click
from rich.logging import RichHandler

from authsim.errors import AuthSimError, ParseError, SchemaError
from authsim.harness import compare_baseline, run_scenario, selftest
from authsim.report import write_costs, write_report
from authsim.scenario import Scenario, load_scenario, resolve_seed, scenario_schema

EXIT_INVALID = 2
EXIT_RUNTIME = 3


def _load(path: Path) -> Scenario:
    try:
        return load_scenario(path)
    except FileNotFoundError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_INVALID)
    except SchemaError as e:
        click.echo(f"Error: {e}", err=True)
        if e.path:
            click.echo(f"  at: {e.path}", err=True)
        sys.exit(EXIT_INVALID)
    except ParseError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_INVALID)


def _seed(scenario: Scenario, seed: Optional[int]) -> int:
    try:
        return resolve_seed(scenario, seed)
    except ParseError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_INVALID)


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    help="Library log level (default: WARNING)",
)
def cli(log_level: str):
    """SVM-quantized channel-attribute authentication simulator."""
    logging.basicConfig(
        level=log_level.upper(),
        format="%(message)s",
        handlers=[RichHandler(show_path=False, rich_tracebacks=False)],
    )


@cli.command("run")
@click.argument("scenario_path", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True, help="Output directory")
@click.option("--seed", type=int, default=None, help="Master seed (overrides file and AUTHSIM_SEED)")
def cmd_run(scenario_path: Path, out_dir: Path, seed: Optional[int]):
    """Run every session of a scenario and write metrics, trajectories, outcomes and costs."""
    scenario = _load(scenario_path)
    master = _seed(scenario, seed)
    try:
        bundle = run_scenario(scenario, master)
        paths = write_report(bundle, out_dir)
    except (AuthSimError, OSError) as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_RUNTIME)

    m = bundle.metrics
    click.echo(f"scenario {bundle.scenario} (seed {bundle.master_seed}): {m['n_sessions']} sessions")
    click.echo(f"  FAR={m['far']}  FRR={m['frr']}  seed_match_rate={m['seed_match_rate']}")
    for p in paths:
        click.echo(f"  wrote {p}")


@cli.command("compare-baseline")
@click.argument("scenario_path", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True, help="Output directory")
@click.option("--seed", type=int, default=None, help="Master seed (overrides file and AUTHSIM_SEED)")
def cmd_compare_baseline(scenario_path: Path, out_dir: Path, seed: Optional[int]):
    """Fleet authentication cost: proposed scheme vs PUF baseline."""
    scenario = _load(scenario_path)
    master = _seed(scenario, seed)
    try:
        rows = compare_baseline(scenario, master)
        path = write_costs(rows, out_dir)
    except (AuthSimError, OSError) as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_RUNTIME)

    for r in rows:
        click.echo(f"  {r.scheme.value:<12} n={r.n_devices:<6} cost={r.total_cost:<12} t={r.wall_time_s:.6g}s")
    click.echo(f"  wrote {path}")


@cli.command("validate")
@click.argument("scenario_path", type=click.Path(path_type=Path))
def cmd_validate(scenario_path: Path):
    """Validate a scenario file against the schema."""
    scenario = _load(scenario_path)
    click.echo(f"OK: {scenario_path} (scenario {scenario.name!r}, {scenario.n_sessions} sessions)")


@cli.command("selftest")
def cmd_selftest():
    """Known-answer checks; exits 3 if any fails."""
    checks = selftest()
    for name, ok in checks.items():
        click.echo(f"  {'PASS' if ok else 'FAIL'}  {name}")
    if not all(checks.values()):
        sys.exit(EXIT_RUNTIME)


@cli.command("schema")
def cmd_schema():
    """Print the scenario JSON Schema."""
    click.echo(json.dumps(scenario_schema(), indent=2, sort_keys=True))


if __name__ == "__main__":
    cli()
