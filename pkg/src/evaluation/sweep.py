"""
src/evaluation/sweep.py

Sweep over the number of novel domains K_n: one leave-one-domain-out cell (fixed target, every
seed) per value, aggregated into (K_n, mean accuracy, std) rows.

Top-level declarations:
- default_kn_values: 1, K_s and 2 K_s
- kn_sweep: Run the sweep and optionally write sweep.csv
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from src.config import AppConfig, Method
from src.data import DomainDataset

from .lodo import CellTask, ExperimentCoordinator, select_sources
from .reports import write_sweep_csv
from .types import SweepRow

logger = logging.getLogger(__name__)


def default_kn_values(num_source: int) -> List[int]:
    return sorted({1, num_source, 2 * num_source})


def kn_sweep(
    cfg: AppConfig,
    kn_values: Optional[Sequence[int]] = None,
    domains: Optional[Sequence[DomainDataset]] = None,
    out_dir: Optional[str | Path] = None,
) -> List[SweepRow]:
    coordinator = ExperimentCoordinator(cfg, domains)
    target = coordinator.default_target()
    num_source = len(select_sources(coordinator.domains, target, cfg.eval.num_sources))
    values = list(kn_values or cfg.eval.kn_values or default_kn_values(num_source))
    bad = [k for k in values if not 1 <= k <= 2 * num_source]
    if bad:
        raise ValueError(f"K_n values {bad} outside [1, {2 * num_source}]")

    tasks = []
    for kn in values:
        kn_cfg = cfg.model_copy(update={"train": cfg.train.model_copy(update={"num_novel": kn})})
        for seed in cfg.eval.seeds:
            run_dir = str(Path(out_dir) / f"kn{kn}") if out_dir is not None else None
            tasks.append(CellTask(cfg=kn_cfg, target_index=target, method=Method.L2A_OT, seed=seed, out_dir=run_dir))
    results = coordinator.run_cells(tasks)

    rows: List[SweepRow] = []
    per_kn = len(cfg.eval.seeds)
    for i, kn in enumerate(values):
        cells = results[i * per_kn : (i + 1) * per_kn]
        accs = [c.accuracy for c in cells if c.ok]
        mean = float(np.mean(accs)) if accs else float("nan")
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
        degenerate = any(c.diversity_degenerate for c in cells)
        if degenerate:
            logger.warning(f"K_n={kn}: diversity term is degenerate (no distinct novel pairs)")
        rows.append(SweepRow(kn=kn, mean_acc=mean, std_acc=std, degenerate_diversity=degenerate))
        logger.info(f"K_n={kn}: {mean:.2f} +/- {std:.2f}")

    if out_dir is not None:
        write_sweep_csv(rows, Path(out_dir) / "sweep.csv")
    return rows
