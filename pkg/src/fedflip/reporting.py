"""Serialization of run metrics: CSV/JSON emission and comparison tables.

Floats are written with ``repr`` (shortest round-trip form, >= 15
significant digits), so files re-parse to exactly the values that were
computed and re-emitting the same records is byte-identical apart from the
timing columns.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from . import _kernels
from .config import config_to_dict, dump_config
from .harness import DetectionReport, ExperimentConfig, RoundRecord, SuiteRow


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def detection_to_dict(report: DetectionReport) -> dict:
    return {
        "detected": sorted(report.detected),
        "true_positives": report.true_positives,
        "false_positives": report.false_positives,
        "false_negatives": report.false_negatives,
        "first_detection_round": report.first_detection_round,
        "last_detection_round": report.last_detection_round,
    }


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def emit_metrics(
    records: list[RoundRecord],
    report: DetectionReport,
    out_dir,
    config: ExperimentConfig | None = None,
    emit: tuple[str, ...] = ("csv", "json"),
) -> list[Path]:
    """Write rounds.csv, trust.csv, detection.json, summary.json (+ config echo).

    Column order is fixed and output is deterministic for deterministic
    records; only aggregation timings vary between runs. Empty record lists
    produce headers-only CSV files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    clients = sorted({j for r in records for j in r.trust_snapshot})

    if "csv" in emit:
        rounds_path = out / "rounds.csv"
        with open(rounds_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "global_accuracy", "test_error", "aggregation_time_ns"])
            for r in records:
                writer.writerow(
                    [r.round, _fmt(r.global_accuracy), _fmt(r.test_error), r.aggregation_time_ns]
                )
        written.append(rounds_path)

        trust_path = out / "trust.csv"
        with open(trust_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round"] + [f"client_{j}" for j in clients])
            for r in records:
                writer.writerow(
                    [r.round] + [_fmt(r.trust_snapshot.get(j, 0.0)) for j in clients]
                )
        written.append(trust_path)

    if "json" in emit:
        detection_path = out / "detection.json"
        _write_json(detection_path, detection_to_dict(report))
        written.append(detection_path)

        summary: dict = {"backend": _kernels.BACKEND, "rounds": len(records)}
        if records:
            final = records[-1]
            times = [r.aggregation_time_ns for r in records]
            summary["final"] = {
                "round": final.round,
                "global_accuracy": final.global_accuracy,
                "test_error": final.test_error,
                "excluded_clients": sorted(final.beta_snapshot),
            }
            summary["mean_aggregation_time_ms"] = (sum(times) / len(times)) / 1e6
        summary["detection"] = detection_to_dict(report)
        if config is not None:
            summary["config"] = config_to_dict(config)
        summary_path = out / "summary.json"
        _write_json(summary_path, summary)
        written.append(summary_path)

        if config is not None:
            echo_path = out / "config.toml"
            echo_path.write_text(dump_config(config), encoding="utf-8")
            written.append(echo_path)

    return written


def render_table(rows: list[SuiteRow]) -> str:
    """Aligned text table of suite rows (times shown in milliseconds)."""
    header = ("defense", "final_accuracy", "final_test_error", "agg_time_ms")
    cells = [header] + [
        (
            row.label,
            f"{row.final_accuracy:.4f}",
            f"{row.final_test_error:.4f}",
            f"{row.mean_aggregation_time_ns / 1e6:.3f}",
        )
        for row in rows
    ]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_compare_csv(rows: list[SuiteRow], path) -> Path:
    """Suite rows as CSV; timing column is last so the rest is deterministic."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["defense", "final_accuracy", "final_test_error", "mean_aggregation_time_ms"])
        for row in rows:
            writer.writerow(
                [
                    row.label,
                    _fmt(row.final_accuracy),
                    _fmt(row.final_test_error),
                    _fmt(row.mean_aggregation_time_ns / 1e6),
                ]
            )
    return path
