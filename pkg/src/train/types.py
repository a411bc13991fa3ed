"""
src/train/types.py

Pydantic models for loss weights, novel-domain assignments, optimizer state, training state and
the per-iteration training log, plus the training exceptions.

Top-level declarations:
- TrainingDivergedError: Non-finite loss or gradient; names the iteration and last good checkpoint
- CriticSetupError: Critic pretraining needs at least two source domains
- LossWeights: lambda_domain, lambda_cycle, lambda_ce and the task blend alpha
- NovelAssignment: Source index -> novel label for one iteration
- SGDState / AdamState: Optimizer moments carried between steps
- TrainRecord: One row of the training log
- TrainLog: Ordered records with fixed-column CSV output
- TrainState: Everything train_step reads and replaces
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config import TrainConfig
from src.data import BatchSampler
from src.nets import GeneratorWeights, TaskClassifierWeights


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int, last_checkpoint: Optional[str], detail: str = "non-finite loss"):
        self.iteration = iteration
        self.last_checkpoint = last_checkpoint
        where = last_checkpoint or "none written"
        super().__init__(f"Training diverged at iteration {iteration}: {detail} (last checkpoint: {where})")


class CriticSetupError(ValueError):
    pass


class LossWeights(BaseModel):
    # Generator weights (domain, cycle, CE) and the F blend alpha
    lambda_domain: float = 1.0
    lambda_cycle: float = 10.0
    lambda_ce: float = 1.0
    alpha: float = 0.5

    @model_validator(mode="after")
    def check_ranges(self) -> "LossWeights":
        if min(self.lambda_domain, self.lambda_cycle, self.lambda_ce) < 0:
            raise ValueError("loss weights must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        return self

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "LossWeights":
        return cls(
            lambda_domain=cfg.lambda_domain,
            lambda_cycle=cfg.lambda_cycle,
            lambda_ce=cfg.lambda_ce,
            alpha=cfg.alpha,
        )


class NovelAssignment(BaseModel):
    # targets[k] is the novel label (0-based within D_n) assigned to source k
    num_novel: int
    targets: List[int]

    @property
    def injective(self) -> bool:
        return len(set(self.targets)) == len(self.targets)

    def code_index(self, source: int) -> int:
        # Position of the novel label in the K_s + K_n one-hot code
        return len(self.targets) + self.targets[source]


class SGDState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    velocity: Dict[str, np.ndarray] = Field(default_factory=dict)


class AdamState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    step: int = 0
    m: Dict[str, np.ndarray] = Field(default_factory=dict)
    v: Dict[str, np.ndarray] = Field(default_factory=dict)


class TrainRecord(BaseModel):
    iter: int
    l_novel: float
    l_diversity: float
    diversity_degenerate: bool = Field(default=False, exclude=True)
    l_cycle: float
    l_ce_gen: float
    l_g: float
    l_f_real: float
    l_f_gen: float
    grad_norm_g: float
    grad_norm_f: float
    seconds: float = 0.0


# diversity_degenerate is kept in memory only
TRAIN_LOG_COLUMNS = [name for name, field in TrainRecord.model_fields.items() if not field.exclude]


class TrainLog(BaseModel):
    records: List[TrainRecord] = Field(default_factory=list)

    def append(self, record: TrainRecord) -> None:
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    @property
    def diversity_degenerate(self) -> bool:
        # True when no step had two distinct novel labels to compare
        return bool(self.records) and all(r.diversity_degenerate for r in self.records)

    def write_csv(self, path: str | Path) -> Path:
        # repr-precision floats so identical runs give identical bytes
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=TRAIN_LOG_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for record in self.records:
                row = record.model_dump()
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return target


class TrainState(BaseModel):
    # Mutable-by-replacement training state; rng and samplers advance in place
    model_config = ConfigDict(arbitrary_types_allowed=True)

    iteration: int = 0
    generator: GeneratorWeights
    classifier: TaskClassifierWeights
    adam: AdamState = Field(default_factory=AdamState)
    sgd: SGDState = Field(default_factory=SGDState)
    rng: np.random.Generator
    samplers: List[BatchSampler]
    last_checkpoint: Optional[str] = None
