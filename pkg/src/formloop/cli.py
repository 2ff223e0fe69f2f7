"""Operator entry point.

    formloop run --config configs/demo.yaml --export-dir out/
    formloop replay out/events.jsonl
    formloop report out/dashboard_payload.json --export-dir figs/
    formloop serve --config configs/demo.yaml --port 8420

`run` drives the closed loop headless until the stopping criterion, then
writes the results table, Pareto export, dashboard payload, broker event
log, and rendered figures. `serve` keeps the services up for the UI.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import ConfigError, StudyConfig, load_config


def _load(config_path: str | None) -> StudyConfig:
    if config_path:
        return load_config(config_path)
    return StudyConfig().validate()


@click.group()
def main() -> None:
    """Closed-loop formation-protocol optimization platform."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), help="study config file")
@click.option("--seed", type=int, default=None, help="override the study seed")
@click.option("--max-batches", type=int, default=None, help="override the batch budget")
@click.option("--warm-start", type=click.Path(exists=True), default=None, help="prior results table (CSV)")
@click.option("--auto-confirm-transport/--no-auto-confirm-transport", default=None)
@click.option("--export-dir", type=click.Path(), default=None, help="artifact directory")
@click.option("--no-figures", is_flag=True, help="skip figure rendering")
@click.option("--serve", "serve_after", is_flag=True,
              help="keep the HTTP services up for the UI after the run")
@click.option("--frontend", type=click.Path(), default="frontend/dist", help="static UI directory")
def run(config_path, seed, max_batches, warm_start, auto_confirm_transport, export_dir,
        no_figures, serve_after, frontend):
    """Run a study headless and export its artifacts."""
    from .runtime import StudyRuntime

    try:
        cfg = _load(config_path)
        if seed is not None:
            cfg.seed = seed
        if max_batches is not None:
            cfg.max_batches = max_batches
        if warm_start is not None:
            cfg.warm_start = warm_start
        if auto_confirm_transport is not None:
            cfg.auto_confirm_transport = auto_confirm_transport
        if export_dir is not None:
            cfg.export_dir = export_dir
        cfg.validate()
    except ConfigError as exc:
        raise click.ClickException(f"config error: {exc}")

    runtime = StudyRuntime(cfg)
    runtime.setup_records()
    outcome = runtime.run()
    artifacts = runtime.export(cfg.export_dir, render=not no_figures)

    click.echo(f"stopped: {outcome.stopped_reason} after {outcome.ticks} ticks")
    click.echo(f"batches completed: {len(outcome.samples)}")
    click.echo(f"failed workflows: {outcome.n_failed_workflows}")
    for name, path in sorted(artifacts.items()):
        click.echo(f"  {name}: {path}")
    if outcome.n_failed_workflows > cfg.failed_workflow_tolerance:
        click.echo("failed workflows exceed tolerance", err=True)
        sys.exit(1)
    if serve_after:
        _serve_runtime(runtime, cfg, host=None, port=None, frontend=frontend,
                       background_ticks=True)


@main.command()
@click.argument("event_log", type=click.Path(exists=True))
def replay(event_log):
    """Audit an exported event log: statuses, transitions, final counts."""
    from .runtime import replay_request_statuses

    events = []
    with open(event_log) as fh:
        for line in fh:
            if line.strip():
                events.append(json.loads(line))

    class _E:
        def __init__(self, doc):
            self.kind = doc["kind"]
            self.payload = doc["payload"]

    try:
        statuses = replay_request_statuses([_E(e) for e in events])
    except AssertionError as exc:
        raise click.ClickException(f"event log violates the protocol: {exc}")
    counts: dict[str, int] = {}
    for status in statuses.values():
        counts[status] = counts.get(status, 0) + 1
    click.echo(f"events: {len(events)}")
    click.echo(f"requests: {len(statuses)}")
    for status in ("pending", "reserved", "resolved"):
        click.echo(f"  {status}: {counts.get(status, 0)}")
    click.echo("no backward transitions detected")


@main.command()
@click.argument("payload_path", type=click.Path(exists=True))
@click.option("--export-dir", type=click.Path(), default="figures", help="output directory")
def report(payload_path, export_dir):
    """Render dashboard figures from an exported payload document."""
    from .report import render_report

    payload = json.loads(Path(payload_path).read_text())
    written = render_report(payload, export_dir)
    for path in written:
        click.echo(str(path))


def _serve_runtime(runtime, cfg, host, port, frontend, background_ticks):
    import threading
    import time

    import uvicorn

    from .server import create_app

    bind_host, _, bind_port = cfg.broker.bind.partition(":")
    host = host or bind_host or "127.0.0.1"
    port = port or int(bind_port or 8420)
    app = create_app(runtime, frontend_dist=frontend)

    if background_ticks:
        def pump() -> None:
            while True:
                runtime.tick()
                time.sleep(1.0)

        threading.Thread(target=pump, daemon=True).start()

    click.echo(f"serving on http://{host}:{port} (study '{cfg.name}')")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), help="study config file")
@click.option("--host", default=None, help="bind host (default from config)")
@click.option("--port", type=int, default=None, help="bind port (default from config)")
@click.option("--warm-start", type=click.Path(exists=True), default=None)
@click.option("--frontend", type=click.Path(), default="frontend/dist", help="static UI directory")
@click.option("--background-ticks/--no-background-ticks", default=True,
              help="advance the closed loop on a timer while serving")
def serve(config_path, host, port, warm_start, frontend, background_ticks):
    """Keep broker, records, and dashboard endpoints up for the UI."""
    from .runtime import StudyRuntime

    try:
        cfg = _load(config_path)
        if warm_start is not None:
            cfg.warm_start = warm_start
    except ConfigError as exc:
        raise click.ClickException(f"config error: {exc}")

    runtime = StudyRuntime(cfg)
    runtime.setup_records()
    runtime.activate()
    _serve_runtime(runtime, cfg, host, port, frontend, background_ticks)


if __name__ == "__main__":
    main()
