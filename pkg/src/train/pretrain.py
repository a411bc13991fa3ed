"""
src/train/pretrain.py

Pretraining passes run before the alternating loop: the task classifier Y-hat on pooled source
training splits (also the vanilla baseline), and the critic phi on source-domain classification.
Both use minibatch SGD with momentum and weight decay from the pretrain section.

Top-level declarations:
- PretrainResult: Trained weights plus validation accuracy (percent)
- pooled: Concatenate images and labels across datasets
- pretrain_task_classifier: Y-hat / vanilla classifier
- pretrain_critic: Domain-classification critic; rejects fewer than two sources
"""

from __future__ import annotations

import logging
from typing import Callable, Sequence, Tuple, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.config import AppConfig, PretrainConfig
from src.data import BatchSampler, DomainDataset
from src.nets import (
    ClassifierSpec,
    CriticSpec,
    Params,
    WeightSet,
    classifier_forward,
    classifier_predict,
    critic_logits,
    critic_predict,
    init_weights,
)
from src.tensor import NonFiniteError, Tensor, grad
from src.tensor.layers import softmax_cross_entropy

from .optim import sgd_step
from .types import CriticSetupError, SGDState, TrainingDivergedError

logger = logging.getLogger(__name__)

W = TypeVar("W", bound=WeightSet)
LossFn = Callable[[Params, Tensor, np.ndarray], Tensor]


class PretrainResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    weights: WeightSet
    val_accuracy: float


def pooled(datasets: Sequence[DomainDataset], labels: str = "class") -> Tuple[np.ndarray, np.ndarray]:
    # labels="class" keeps class labels; labels="domain" uses each dataset's position in the list
    images = np.concatenate([ds.images for ds in datasets])
    if labels == "domain":
        y = np.concatenate([np.full(len(ds), k, dtype=np.int64) for k, ds in enumerate(datasets)])
    else:
        y = np.concatenate([ds.labels for ds in datasets])
    return images, y


def _fit(
    weights: W,
    loss_fn: LossFn,
    images: np.ndarray,
    labels: np.ndarray,
    epochs: int,
    cfg: PretrainConfig,
    what: str,
) -> W:
    n = images.shape[0]
    size = min(cfg.batch_size, n - n % 2)
    sampler = BatchSampler(n, size, cfg.seed)
    state = SGDState()
    steps = n // size
    for epoch in range(epochs):
        total = 0.0
        for step in range(steps):
            idx = sampler.next_indices()
            params = weights.tensors(trainable=True)
            try:
                loss = loss_fn(params, Tensor(images[idx]), labels[idx])
            except NonFiniteError as e:
                raise TrainingDivergedError(epoch * steps + step, None, f"{what}: {e}")
            grads = grad(loss, params)
            arrays, state = sgd_step(
                weights.arrays, grads, cfg.lr, cfg.momentum, cfg.weight_decay, state
            )
            weights = weights.replace(arrays)
            total += loss.item()
        logger.info(f"Pretrain {what}: epoch {epoch + 1}/{epochs} mean loss {total / steps:.4f}")
    return weights


def _classifier_loss(p: Params, x: Tensor, y: np.ndarray) -> Tensor:
    return softmax_cross_entropy(classifier_forward(p, x)[0], y)


def _critic_loss(p: Params, x: Tensor, y: np.ndarray) -> Tensor:
    return softmax_cross_entropy(critic_logits(p, x), y)


def _percent(pred: np.ndarray, labels: np.ndarray) -> float:
    return 100.0 * float(np.mean(pred == labels)) if labels.size else 0.0


def pretrain_task_classifier(
    cfg: AppConfig, train: Sequence[DomainDataset], val: Sequence[DomainDataset]
) -> PretrainResult:
    if not train:
        raise ValueError("pretrain_task_classifier needs at least one source domain")
    spec = ClassifierSpec(
        image_channels=cfg.model.image_channels,
        image_size=cfg.model.image_size,
        width=cfg.model.classifier_width,
        num_classes=cfg.model.num_classes,
    )
    weights = init_weights(spec, cfg.pretrain.seed)
    images, labels = pooled(train)
    weights = _fit(weights, _classifier_loss, images, labels, cfg.pretrain.classifier_epochs, cfg.pretrain, "classifier")

    val_images, val_labels = pooled(val)
    accuracy = _percent(classifier_predict(weights.tensors(trainable=False), val_images), val_labels)
    logger.info(f"Pretrained classifier: source-val accuracy {accuracy:.2f}%")
    return PretrainResult(weights=weights, val_accuracy=accuracy)


def pretrain_critic(
    cfg: AppConfig, train: Sequence[DomainDataset], val: Sequence[DomainDataset]
) -> PretrainResult:
    if len(train) < 2:
        raise CriticSetupError(
            f"critic pretraining classifies source domains and needs at least 2, got {len(train)}"
        )
    spec = CriticSpec(
        image_channels=cfg.model.image_channels,
        widths=list(cfg.model.critic_widths),
        embedding_dim=cfg.model.embedding_dim,
        num_domains=len(train),
    )
    weights = init_weights(spec, cfg.pretrain.seed + 1)
    images, domains = pooled(train, labels="domain")
    weights = _fit(weights, _critic_loss, images, domains, cfg.pretrain.critic_epochs, cfg.pretrain, "critic")

    val_images, val_domains = pooled(val, labels="domain")
    accuracy = _percent(critic_predict(weights.tensors(trainable=False), val_images), val_domains)
    logger.info(f"Pretrained critic: source-val domain accuracy {accuracy:.2f}%")
    return PretrainResult(weights=weights, val_accuracy=accuracy)
