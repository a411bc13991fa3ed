"""
src/train/__init__.py

Package initialization for training: loss terms, optimizers, pretraining passes and the
alternating generator / classifier loop.

No top-level functions or classes.
"""

from .losses import (
    combine_task_loss,
    generator_loss,
    loss_ce_generated,
    loss_cycle,
    loss_diversity,
    loss_novel,
    task_loss,
)
from .optim import adam_step, global_norm, sgd_step, step_lr
from .pretrain import PretrainResult, pooled, pretrain_critic, pretrain_task_classifier
from .trainer import TrainContext, assign_novel_domains, init_state, run_training, save_checkpoint, train_step
from .types import (
    TRAIN_LOG_COLUMNS,
    AdamState,
    CriticSetupError,
    LossWeights,
    NovelAssignment,
    SGDState,
    TrainingDivergedError,
    TrainLog,
    TrainRecord,
    TrainState,
)

__all__ = [
    "TRAIN_LOG_COLUMNS",
    "AdamState",
    "CriticSetupError",
    "LossWeights",
    "NovelAssignment",
    "PretrainResult",
    "SGDState",
    "TrainContext",
    "TrainLog",
    "TrainRecord",
    "TrainState",
    "TrainingDivergedError",
    "adam_step",
    "assign_novel_domains",
    "combine_task_loss",
    "generator_loss",
    "global_norm",
    "init_state",
    "loss_ce_generated",
    "loss_cycle",
    "loss_diversity",
    "loss_novel",
    "pooled",
    "pretrain_critic",
    "pretrain_task_classifier",
    "run_training",
    "save_checkpoint",
    "sgd_step",
    "step_lr",
    "task_loss",
    "train_step",
]
