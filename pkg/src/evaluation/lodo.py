"""
src/evaluation/lodo.py

Leave-one-domain-out orchestration. A cell is one (held-out target, method, seed) run: split the
remaining sources, pretrain Y-hat (the vanilla model) and the critic, train the chosen arm, and
evaluate on the target. Training code only ever receives source splits; the target sits behind an
audited handle that is opened once, for evaluation.

Top-level declarations:
- METHOD_OVERRIDES: Train-section changes that define each arm
- method_config / seeded_config: Derived configurations for one cell
- CellTask: Everything a worker needs to run one cell
- run_cell: Execute one cell and return its CellResult
- ExperimentCoordinator: Resolves grids, runs cells (sequentially or in worker processes) and
  turns failures into recorded cell errors
- leave_one_domain_out: Full grid for one method, with report files
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.config import AppConfig, ConfigError, Method, config_digest
from src.data import DomainDataset, build_domains, make_splits, split_spec_from_config
from src.tensor import set_precision
from src.train import pretrain_critic, pretrain_task_classifier, run_training

from .accuracy import evaluate_accuracy
from .reports import write_report_csv, write_report_summary
from .types import CellResult, ExperimentReport, TargetHandle

logger = logging.getLogger(__name__)

METHOD_OVERRIDES: Dict[Method, Dict[str, Any]] = {
    Method.VANILLA: {},
    Method.L2A_OT: {},
    Method.NO_DIVERSITY: {"use_diversity": False},
    Method.NO_SEMANTIC: {"lambda_cycle": 0.0, "lambda_ce": 0.0},
    Method.SEMANTIC_ONLY: {"lambda_domain": 0.0},
}


def method_config(cfg: AppConfig, method: Method) -> AppConfig:
    train = cfg.train.model_copy(update=METHOD_OVERRIDES[method])
    return cfg.model_copy(update={"train": train, "eval": cfg.eval.model_copy(update={"method": method})})


def seeded_config(cfg: AppConfig, seed: int) -> AppConfig:
    # Offsets every seed of the run, so seed 0 reproduces the configured seeds
    return cfg.model_copy(
        update={
            "pretrain": cfg.pretrain.model_copy(update={"seed": cfg.pretrain.seed + seed}),
            "train": cfg.train.model_copy(update={"seed": cfg.train.seed + seed}),
        }
    )


def select_sources(domains: Sequence[DomainDataset], target_index: int, num_sources: int = 0) -> List[DomainDataset]:
    # Remaining domains in registry order; num_sources > 0 keeps only the first num_sources
    remaining = [d for i, d in enumerate(domains) if i != target_index]
    return remaining[:num_sources] if num_sources > 0 else remaining


class CellTask(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    cfg: AppConfig
    target_index: int
    method: Method
    seed: int
    out_dir: Optional[str] = None


def run_cell(task: CellTask, domains: Sequence[DomainDataset]) -> CellResult:
    cfg = task.cfg
    set_precision(cfg.tensor.dtype)
    started = time.perf_counter()
    target = TargetHandle(domains[task.target_index])
    cell = logging.LoggerAdapter(logger, {"cell": f"{target.name}/{task.method.value}/{task.seed}"})

    sources = select_sources(domains, task.target_index, cfg.eval.num_sources)
    if len(sources) < 2:
        raise ValueError(f"leave-one-domain-out needs >= 2 source domains, got {len(sources)}")
    spec = split_spec_from_config(cfg.data)
    splits = [make_splits(src, spec) for src in sources]
    train = [t for t, _ in splits]
    val = [v for _, v in splits]

    cell_cfg = seeded_config(method_config(cfg, task.method), task.seed)
    cell.info(f"Sources: {', '.join(s.name for s in sources)}")
    yhat = pretrain_task_classifier(cell_cfg, train, val)
    if task.method == Method.VANILLA:
        classifier = yhat.weights
        iterations = 0
        degenerate = False
    else:
        critic = pretrain_critic(cell_cfg, train, val)
        run_dir = None
        if task.out_dir is not None:
            run_dir = Path(task.out_dir) / f"{target.name}_{task.method.value}_seed{task.seed}"
        _, classifier, log = run_training(cell_cfg, train, yhat.weights, critic.weights, run_dir)
        iterations = cell_cfg.train.iterations
        degenerate = cell_cfg.train.use_diversity and log.diversity_degenerate

    source_val = float(np.average([evaluate_accuracy(classifier, v) for v in val], weights=[len(v) for v in val]))
    target.check_untouched()
    accuracy = evaluate_accuracy(classifier, target.open("evaluation"))
    cell.info(f"Target accuracy {accuracy:.2f}% (source-val {source_val:.2f}%)")
    return CellResult(
        target_domain=target.name,
        method=task.method,
        seed=task.seed,
        accuracy=accuracy,
        source_val_accuracy=source_val,
        iterations=iterations,
        diversity_degenerate=degenerate,
        seconds=time.perf_counter() - started if cfg.train.record_wall_time else 0.0,
    )


class ExperimentCoordinator:
    # Resolves grids and runs cells; one failing cell never stops the grid

    def __init__(self, cfg: AppConfig, domains: Optional[Sequence[DomainDataset]] = None):
        self.cfg = cfg
        self.domains = list(domains) if domains is not None else build_domains(cfg)

    def target_indices(self) -> List[int]:
        names = [d.name for d in self.domains]
        if not self.cfg.eval.targets:
            return list(range(len(names)))
        unknown = [t for t in self.cfg.eval.targets if t not in names]
        if unknown:
            raise ConfigError(f"Unknown target domains {unknown}; known: {names}", key="eval.targets")
        return [names.index(t) for t in self.cfg.eval.targets]

    def default_target(self) -> int:
        # First configured target, else the last registered domain
        return self.target_indices()[0] if self.cfg.eval.targets else len(self.domains) - 1

    def _handle_cell_error(self, task: CellTask, error: BaseException) -> CellResult:
        name = self.domains[task.target_index].name
        logger.error(
            f"Cell {name}/{task.method.value}/{task.seed} failed: {type(error).__name__}: {error}",
            exc_info=error,
        )
        return CellResult(
            target_domain=name,
            method=task.method,
            seed=task.seed,
            error=f"{type(error).__name__}: {error}",
        )

    def run_cells(self, tasks: Sequence[CellTask]) -> List[CellResult]:
        # Results come back in task order whether or not workers are used
        workers = max(1, self.cfg.eval.workers)
        results: List[CellResult] = []
        if workers == 1 or len(tasks) < 2:
            for task in tasks:
                try:
                    results.append(run_cell(task, self.domains))
                except Exception as e:
                    results.append(self._handle_cell_error(task, e))
            return results

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, task, self.domains) for task in tasks]
            for task, future in zip(tasks, futures):
                try:
                    results.append(future.result())
                except Exception as e:
                    results.append(self._handle_cell_error(task, e))
        return results

    def leave_one_domain_out(self, method: Optional[Method] = None, out_dir: Optional[str | Path] = None) -> ExperimentReport:
        method = method or self.cfg.eval.method
        started = time.perf_counter()
        tasks = [
            CellTask(
                cfg=self.cfg,
                target_index=t,
                method=method,
                seed=seed,
                out_dir=str(out_dir) if out_dir is not None else None,
            )
            for t in self.target_indices()
            for seed in self.cfg.eval.seeds
        ]
        logger.info(f"Leave-one-domain-out: method={method.value}, {len(tasks)} cells")
        report = ExperimentReport(
            method=method,
            cells=self.run_cells(tasks),
            config_digest=config_digest(self.cfg),
            seconds=time.perf_counter() - started if self.cfg.train.record_wall_time else 0.0,
        )
        for summary in report.summaries():
            logger.info(f"{summary.target_domain}: {summary.mean:.2f} +/- {summary.std:.2f} over {len(summary.accuracies)} seeds")
        if out_dir is not None:
            write_report_csv(report, Path(out_dir) / f"report_{method.value}.csv")
            write_report_summary(report, Path(out_dir) / f"report_{method.value}.json")
        return report


def leave_one_domain_out(
    cfg: AppConfig,
    method: Optional[Method] = None,
    domains: Optional[Sequence[DomainDataset]] = None,
    out_dir: Optional[str | Path] = None,
) -> ExperimentReport:
    return ExperimentCoordinator(cfg, domains).leave_one_domain_out(method, out_dir)
