"""Command-line front end.

Exit codes: 0 on success, 2 for configuration problems, 3 for runtime
failures. ``FEDFLIP_OUT`` sets the default output directory.
"""

from __future__ import annotations

import functools
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from .config import parse_config
from .defense import compute_overhead_estimate
from .errors import ConfigError, FedFlipError
from .harness import build_datasets, run_experiment, run_suite
from .reporting import emit_metrics, render_table, write_compare_csv

EMIT_CHOICES = ("csv", "json", "summary")


@dataclass(frozen=True)
class RunManifest:
    """One requested run: config file, output directory, overrides, emit flags."""

    config_path: str
    out_dir: str
    overrides: tuple[str, ...] = ()
    emit: tuple[str, ...] = EMIT_CHOICES


def _cli_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except (FedFlipError, ValueError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


@click.group()
def main():
    """Deterministic federated-learning simulator with label-flipping defenses."""


def execute_run(manifest: RunManifest) -> list[Path]:
    """Parse, simulate, and emit one experiment; returns written paths."""
    cfg = parse_config(manifest.config_path, manifest.overrides)
    _, test_set = build_datasets(cfg.data, cfg.master_seed)
    records, report, _ = run_experiment(cfg, test_set)
    written = emit_metrics(records, report, manifest.out_dir, cfg, manifest.emit)
    if "summary" in manifest.emit:
        final = records[-1]
        mean_ms = sum(r.aggregation_time_ns for r in records) / len(records) / 1e6
        click.echo(f"defense={cfg.defense_kind} rounds={len(records)}")
        click.echo(
            f"final accuracy={final.global_accuracy:.4f} test_error={final.test_error:.4f}"
        )
        click.echo(f"mean aggregation time={mean_ms:.3f} ms")
        click.echo(f"excluded clients={sorted(final.beta_snapshot)}")
        for path in written:
            click.echo(f"wrote {path}")
    return written


@main.command(name="run")
@click.argument("config_path", type=click.Path())
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config key (e.g. --set total_rounds=5).")
@click.option("--out", "out_dir", envvar="FEDFLIP_OUT", default="out",
              show_default=True, help="Output directory [env: FEDFLIP_OUT].")
@click.option("--emit", "emit", multiple=True, type=click.Choice(EMIT_CHOICES),
              help="Restrict outputs (default: csv, json, and summary).")
@_cli_errors
def cmd_run(config_path, overrides, out_dir, emit):
    """Run one experiment and emit metrics."""
    execute_run(RunManifest(config_path, out_dir, tuple(overrides), tuple(emit) or EMIT_CHOICES))


def execute_compare(manifests: list[RunManifest], out_dir) -> Path:
    """Run several configs under a shared seed and tabulate the results."""
    configs = [parse_config(m.config_path, m.overrides) for m in manifests]
    for m, cfg in zip(manifests[1:], configs[1:]):
        if cfg.data != configs[0].data:
            raise ConfigError(
                f"{m.config_path}: compare requires identical [data] sections"
            )
    _, test_set = build_datasets(configs[0].data, configs[0].master_seed)
    rows = run_suite(configs, test_set)
    click.echo(render_table(rows))
    return write_compare_csv(rows, Path(out_dir) / "compare.csv")


@main.command(name="compare")
@click.argument("config_paths", nargs=-1, required=True, type=click.Path())
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override applied to every config.")
@click.option("--out", "out_dir", envvar="FEDFLIP_OUT", default="out",
              show_default=True, help="Output directory [env: FEDFLIP_OUT].")
@_cli_errors
def cmd_compare(config_paths, overrides, out_dir):
    """Run several configs under one seed and print a comparison table."""
    manifests = [RunManifest(p, out_dir, tuple(overrides)) for p in config_paths]
    path = execute_compare(manifests, out_dir)
    click.echo(f"wrote {path}")


@main.command(name="estimate-overhead")
@click.option("--epochs", type=int, required=True, help="Local epochs per round (E).")
@click.option("--eval-fraction", type=float, required=True,
              help="Fraction of local data evaluated each round.")
@_cli_errors
def cmd_estimate_overhead(epochs, eval_fraction):
    """Print the relative client-side cost of local evaluation."""
    ratio = compute_overhead_estimate(epochs, eval_fraction)
    click.echo(f"relative_overhead = {ratio!r} ({ratio:.2%} of training cost)")


if __name__ == "__main__":
    main()
