"""
src/evaluation/__init__.py

Package initialization for evaluation: accuracy, leave-one-domain-out orchestration, the K_n
sweep, embedding export, source-only model selection, report writers and the self-test suites.

No top-level functions or classes.
"""

from .accuracy import evaluate_accuracy
from .embeddings import MIN_SAMPLES, export_embeddings, pca_2d
from .lodo import (
    METHOD_OVERRIDES,
    CellTask,
    ExperimentCoordinator,
    leave_one_domain_out,
    method_config,
    run_cell,
    seeded_config,
    select_sources,
)
from .reports import (
    REPORT_COLUMNS,
    SELECTION_COLUMNS,
    SWEEP_COLUMNS,
    write_embeddings_csv,
    write_report_csv,
    write_report_summary,
    write_selection_csv,
    write_sweep_csv,
)
from .selection import DEFAULT_GRID, select_hyperparameters
from .selftest import GRADIENT_CASES, danskin_check, gradient_suite, run_selftest, sinkhorn_oracle_check
from .sweep import default_kn_values, kn_sweep
from .types import (
    CellResult,
    EmbeddingDump,
    EmbeddingExportError,
    ExperimentReport,
    SelectionResult,
    SelectionRow,
    SweepRow,
    TargetHandle,
    TargetLeakError,
    TargetSummary,
)

__all__ = [
    "DEFAULT_GRID",
    "GRADIENT_CASES",
    "METHOD_OVERRIDES",
    "MIN_SAMPLES",
    "REPORT_COLUMNS",
    "SELECTION_COLUMNS",
    "SWEEP_COLUMNS",
    "CellResult",
    "CellTask",
    "EmbeddingDump",
    "EmbeddingExportError",
    "ExperimentCoordinator",
    "ExperimentReport",
    "SelectionResult",
    "SelectionRow",
    "SweepRow",
    "TargetHandle",
    "TargetLeakError",
    "TargetSummary",
    "danskin_check",
    "default_kn_values",
    "evaluate_accuracy",
    "export_embeddings",
    "gradient_suite",
    "kn_sweep",
    "leave_one_domain_out",
    "method_config",
    "pca_2d",
    "run_cell",
    "run_selftest",
    "seeded_config",
    "select_hyperparameters",
    "select_sources",
    "sinkhorn_oracle_check",
    "write_embeddings_csv",
    "write_report_csv",
    "write_report_summary",
    "write_selection_csv",
    "write_sweep_csv",
]
