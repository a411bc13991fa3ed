"""
src/evaluation/reports.py

Fixed-schema CSV and JSON writers for experiment outputs. Floats are written with repr precision,
so reruns of identical configurations produce identical bytes.

Top-level declarations:
- REPORT_COLUMNS / SWEEP_COLUMNS / SELECTION_COLUMNS: Header rows
- write_report_csv: One row per (target, method, seed) cell
- write_report_summary: Per-target mean/std, config digest and failures as JSON
- write_sweep_csv: One row per K_n
- write_embeddings_csv: tag, label, pc1, pc2, f0..f{d-1}
- write_selection_csv: One row per hyperparameter grid point
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, List, Sequence

from .types import EmbeddingDump, ExperimentReport, SelectionResult, SweepRow

REPORT_COLUMNS = ["target_domain", "method", "seed", "accuracy", "iterations", "seconds"]
SWEEP_COLUMNS = ["kn", "mean_acc", "std_acc"]
SELECTION_COLUMNS = ["lambda_domain", "lambda_cycle", "lambda_ce", "alpha", "source_val_accuracy"]


def _fmt(value: Any) -> Any:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return repr(value)
    return value


def _write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return target


def write_report_csv(report: ExperimentReport, path: str | Path) -> Path:
    return _write_rows(
        path,
        REPORT_COLUMNS,
        (
            [c.target_domain, c.method.value, c.seed, c.accuracy, c.iterations, float(c.seconds)]
            for c in report.cells
        ),
    )


def write_report_summary(report: ExperimentReport, path: str | Path) -> Path:
    payload = {
        "method": report.method.value,
        "config_digest": report.config_digest,
        "mean_accuracy": report.mean_accuracy,
        "targets": [
            {"target_domain": s.target_domain, "accuracies": s.accuracies, "mean": s.mean, "std": s.std}
            for s in report.summaries()
        ],
        "failed": [c.model_dump(mode="json") for c in report.failed],
    }
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target


def write_sweep_csv(rows: List[SweepRow], path: str | Path) -> Path:
    return _write_rows(path, SWEEP_COLUMNS, ([r.kn, r.mean_acc, r.std_acc] for r in rows))


def write_embeddings_csv(dump: EmbeddingDump, path: str | Path) -> Path:
    dim = dump.features.shape[1]
    header = ["tag", "label", "pc1", "pc2"] + [f"f{i}" for i in range(dim)]
    rows = (
        [tag, int(label), float(xy[0]), float(xy[1])] + [float(v) for v in feat]
        for tag, label, xy, feat in zip(dump.tags, dump.labels, dump.coords, dump.features)
    )
    return _write_rows(path, header, rows)


def write_selection_csv(result: SelectionResult, path: str | Path) -> Path:
    return _write_rows(
        path,
        SELECTION_COLUMNS,
        (
            [r.weights.lambda_domain, r.weights.lambda_cycle, r.weights.lambda_ce, r.weights.alpha, r.source_val_accuracy]
            for r in result.rows
        ),
    )
