# ╭──────────────────────────────────────────────────────────────────────╮
# cli/main.py                                                            #
# sketchfl <subcommand> [--config FILE] [--seed N] [--out DIR] ...       #
# ╰──────────────────────────────────────────────────────────────────────╯
"""
Console entry point.

Exit codes: 0 when every enabled assertion holds (or assertions are off),
1 when one does not or a run fails, 2 for configuration errors.
"""
from __future__ import annotations

import sys
from typing import List, Optional, Sequence

from rich.console import Console
from rich.table import Table

from api.schemas import ExperimentConfig
from base.errors import ConfigError, SketchFLError
from base.utils.logging import ColoredLogger
from harness.experiments import EXPERIMENTS, VerifySketchExperiment
from harness.runner import load_config, resolve
from storage.models import RunSummary

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _usage() -> str:
    lines = ["usage: sketchfl <command> [options]", "", "commands:"]
    for name, cls in EXPERIMENTS.items():
        doc = (cls.__doc__ or "").strip().splitlines()
        lines.append(f"  {name:<16} {doc[0] if doc else ''}")
    return "\n".join(lines)


def _fmt_metric(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def render_summary(summary: RunSummary, console: Optional[Console] = None) -> None:
    console = console or Console()
    table = Table(title=f"sketchfl {summary.command}")
    table.add_column("check")
    table.add_column("result")
    for name, ok in summary.assertions.items():
        table.add_row(name, "[green]pass[/green]" if ok else "[red]FAIL[/red]")
    for name, value in summary.metrics.items():
        table.add_row(f"[dim]{name}[/dim]", _fmt_metric(value))
    console.print(table)
    for message in summary.warnings:
        console.print(f"[yellow]warning:[/yellow] {message}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args: List[str] = list(sys.argv[1:] if argv is None else argv)
    if not args or args[0] in ("-h", "--help"):
        print(_usage())
        return EXIT_OK if args else EXIT_CONFIG
    command, rest = args[0], args[1:]
    cls = EXPERIMENTS.get(command)
    if cls is None:
        print(f"sketchfl: unknown command {command!r}\n\n{_usage()}", file=sys.stderr)
        return EXIT_CONFIG

    ns = cls.check_config(cls.config(rest))
    try:
        cfg = load_config(ns.config) if ns.config else ExperimentConfig()
        cfg = resolve(cfg, seed=ns.seed, out=ns.out, assertions=ns.assertions)
        if cls is VerifySketchExperiment:
            experiment = cls(cfg, kinds=ns.kinds)
        else:
            experiment = cls(cfg)
    except ConfigError as exc:
        ColoredLogger.error(f"[Harness] {exc}")
        print(f"sketchfl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        summary = experiment.execute()
    except SketchFLError as exc:
        ColoredLogger.error(f"[Harness] {command} failed: {type(exc).__name__}: {exc}")
        return EXIT_FAILED

    if not ns.quiet:
        render_summary(summary)
    if cfg.assertions and not summary.passed:
        failed = [k for k, ok in summary.assertions.items() if not ok]
        ColoredLogger.error(f"[Harness] assertion(s) failed: {', '.join(failed)}")
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
