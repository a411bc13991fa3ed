"""
src/evaluation/accuracy.py

Top-1 accuracy of a task classifier on a dataset, in percent.

Top-level declarations:
- evaluate_accuracy: argmax over logits compared with labels
"""

from __future__ import annotations

import numpy as np

from src.data import DomainDataset
from src.nets import TaskClassifierWeights, WeightSet, classifier_predict
from src.tensor import ShapeError


def evaluate_accuracy(classifier: TaskClassifierWeights | WeightSet, ds: DomainDataset) -> float:
    if len(ds) == 0:
        raise ValueError(f"cannot evaluate on empty dataset '{ds.name}'")
    spec = classifier.spec
    if ds.images.shape[1] != spec.image_channels or ds.image_size != getattr(spec, "image_size", ds.image_size):
        raise ShapeError(f"dataset images {ds.images.shape[1:]} do not fit classifier {spec}")
    pred = classifier_predict(classifier.tensors(trainable=False), ds.images)
    return 100.0 * float(np.mean(pred == ds.labels))
