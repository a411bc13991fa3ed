"""
src/evaluation/selection.py

Hyperparameter selection on source validation data only. Y-hat and the critic are pretrained once
and shared by every grid point; each point trains the full arm and is scored by the pooled
source-validation accuracy of its classifier. Ties keep the earlier grid point.

Top-level declarations:
- DEFAULT_GRID: lambda_domain x lambda_cycle x lambda_ce search space
- select_hyperparameters: Score the grid and return the best LossWeights
"""

from __future__ import annotations

import logging
from itertools import product
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from src.config import AppConfig
from src.data import DomainDataset, make_splits, split_spec_from_config
from src.train import LossWeights, pretrain_critic, pretrain_task_classifier, run_training

from .accuracy import evaluate_accuracy
from .reports import write_selection_csv
from .types import SelectionResult, SelectionRow

logger = logging.getLogger(__name__)

DEFAULT_GRID: List[LossWeights] = [
    LossWeights(lambda_domain=d, lambda_cycle=c, lambda_ce=ce)
    for d, c, ce in product((0.5, 1.0, 2.0), (10.0, 20.0), (1.0,))
]


def select_hyperparameters(
    cfg: AppConfig,
    sources: Sequence[DomainDataset],
    grid: Optional[Sequence[LossWeights]] = None,
    out_dir: Optional[str | Path] = None,
) -> SelectionResult:
    # `sources` must already exclude any held-out target
    points = list(grid) if grid is not None else list(DEFAULT_GRID)
    if not points:
        raise ValueError("hyperparameter grid is empty")
    spec = split_spec_from_config(cfg.data)
    splits = [make_splits(src, spec) for src in sources]
    train = [t for t, _ in splits]
    val = [v for _, v in splits]
    yhat = pretrain_task_classifier(cfg, train, val)
    critic = pretrain_critic(cfg, train, val)

    rows: List[SelectionRow] = []
    for weights in points:
        point_cfg = cfg.model_copy(
            update={
                "train": cfg.train.model_copy(
                    update={
                        "lambda_domain": weights.lambda_domain,
                        "lambda_cycle": weights.lambda_cycle,
                        "lambda_ce": weights.lambda_ce,
                        "alpha": weights.alpha,
                    }
                )
            }
        )
        _, classifier, _ = run_training(point_cfg, train, yhat.weights, critic.weights)
        score = float(np.average([evaluate_accuracy(classifier, v) for v in val], weights=[len(v) for v in val]))
        rows.append(SelectionRow(weights=weights, source_val_accuracy=score))
        logger.info(
            f"lambda=({weights.lambda_domain}, {weights.lambda_cycle}, {weights.lambda_ce}): source-val {score:.2f}%"
        )

    best = max(range(len(rows)), key=lambda i: (rows[i].source_val_accuracy, -i))
    result = SelectionResult(best=rows[best].weights, rows=rows)
    if out_dir is not None:
        write_selection_csv(result, Path(out_dir) / "selection.csv")
    return result
