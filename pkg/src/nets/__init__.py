"""
src/nets/__init__.py

Package initialization for network builders: conditional generator G, task classifier F / Y-hat,
critic phi, and weight serialization.

No top-level functions or classes.
"""

from .classifier import classifier_forward, classifier_predict
from .critic import critic_embed, critic_features, critic_logits, critic_predict
from .generator import generator_forward
from .types import (
    ClassifierSpec,
    CriticSpec,
    CriticWeights,
    DomainCode,
    GeneratorSpec,
    GeneratorWeights,
    Params,
    TaskClassifierWeights,
    WeightSet,
    WeightsChecksumError,
    WeightsFormatError,
    WeightsVersionError,
)
from .weights import init_weights, load_weights, read_container, save_weights, write_container

__all__ = [
    "ClassifierSpec",
    "CriticSpec",
    "CriticWeights",
    "DomainCode",
    "GeneratorSpec",
    "GeneratorWeights",
    "Params",
    "TaskClassifierWeights",
    "WeightSet",
    "WeightsChecksumError",
    "WeightsFormatError",
    "WeightsVersionError",
    "classifier_forward",
    "classifier_predict",
    "critic_embed",
    "critic_features",
    "critic_logits",
    "critic_predict",
    "generator_forward",
    "init_weights",
    "load_weights",
    "read_container",
    "save_weights",
    "write_container",
]
