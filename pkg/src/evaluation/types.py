"""
src/evaluation/types.py

Pydantic models for experiment results and exports, the audited target-domain handle, and the
evaluation exceptions.

Top-level declarations:
- TargetLeakError: Target data was read outside evaluation
- EmbeddingExportError: Too few samples (or features) to project
- TargetHandle: Holds the held-out domain and counts every read by purpose
- CellResult: One (target, method, seed) run
- TargetSummary: Per-seed accuracies with mean and sample standard deviation
- ExperimentReport: All cells of a leave-one-domain-out grid plus the config digest
- SweepRow: One K_n value of the sweep
- EmbeddingDump: PCA projection and raw critic features of tagged samples
- SelectionRow / SelectionResult: Hyperparameter grid scores on source validation
"""

from __future__ import annotations

from collections import Counter
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.config import Method
from src.data import DomainDataset
from src.train import LossWeights


class TargetLeakError(RuntimeError):
    pass


class EmbeddingExportError(ValueError):
    pass


class TargetHandle:
    # Held-out domain; training code never receives the dataset, only evaluation opens it

    def __init__(self, dataset: DomainDataset):
        self._dataset = dataset
        self.reads: Counter[str] = Counter()

    @property
    def name(self) -> str:
        return self._dataset.name

    def open(self, purpose: str) -> DomainDataset:
        self.reads[purpose] += 1
        if purpose != "evaluation":
            raise TargetLeakError(f"target domain '{self.name}' opened for {purpose}")
        return self._dataset

    def check_untouched(self) -> None:
        if sum(self.reads.values()):
            raise TargetLeakError(f"target domain '{self.name}' was read before evaluation: {dict(self.reads)}")


class CellResult(BaseModel):
    target_domain: str
    method: Method
    seed: int
    accuracy: Optional[float] = None  # percent; None when the cell failed
    source_val_accuracy: Optional[float] = None
    iterations: int = 0
    diversity_degenerate: bool = False
    seconds: float = 0.0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.accuracy is not None


class TargetSummary(BaseModel):
    target_domain: str
    accuracies: List[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if len(self.accuracies) > 1 else 0.0


class ExperimentReport(BaseModel):
    method: Method
    cells: List[CellResult] = Field(default_factory=list)
    config_digest: str = ""
    seconds: float = 0.0

    def summaries(self) -> List[TargetSummary]:
        # Targets in first-seen grid order; failed cells are left out of the statistics
        order: Dict[str, List[float]] = {}
        for cell in self.cells:
            bucket = order.setdefault(cell.target_domain, [])
            if cell.ok:
                bucket.append(float(cell.accuracy))  # type: ignore[arg-type]
        return [TargetSummary(target_domain=t, accuracies=a) for t, a in order.items()]

    @property
    def mean_accuracy(self) -> float:
        means = [s.mean for s in self.summaries() if s.accuracies]
        return float(np.mean(means)) if means else float("nan")

    @property
    def failed(self) -> List[CellResult]:
        return [c for c in self.cells if not c.ok]


class SweepRow(BaseModel):
    kn: int
    mean_acc: float
    std_acc: float
    degenerate_diversity: bool = False


class EmbeddingDump(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    tags: List[str]
    labels: np.ndarray
    coords: np.ndarray  # N x 2
    features: np.ndarray  # N x d
    components: np.ndarray  # 2 x d, orthonormal rows
    mean: np.ndarray  # d


class SelectionRow(BaseModel):
    weights: LossWeights
    source_val_accuracy: float


class SelectionResult(BaseModel):
    best: LossWeights
    rows: List[SelectionRow]
