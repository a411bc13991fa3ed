"""
tests/conftest.py

Shared fixtures: a tiny configuration (16x16 images, narrow networks, few iterations) and the
domain list it builds. Tests marked `slow` run only when L2A_RUN_SLOW=1.

Top-level declarations:
- tiny_settings: The key=value overrides behind tiny_config
- tiny_config: AppConfig sized for unit tests
- tiny_domains: Domains built from tiny_config, shared per session
- float64: Switch tensor precision to float64 for one test
- tiny_pretrained: Source splits of the first three tiny domains with Y-hat and critic pretrained
"""

from __future__ import annotations

import os
from typing import Iterator, List, NamedTuple

import numpy as np
import pytest

from src.config import AppConfig, load_config
from src.data import DomainDataset, build_domains, make_splits, split_spec_from_config
from src.nets import CriticWeights, TaskClassifierWeights
from src.tensor import get_dtype, set_precision
from src.train import pretrain_critic, pretrain_task_classifier

TINY_SETTINGS = [
    "model.image_size=16",
    "model.generator_widths=4,6,8",
    "model.classifier_width=4",
    "model.critic_widths=4,6,8",
    "model.embedding_dim=8",
    "data.n_per_class=20",
    "pretrain.classifier_epochs=1",
    "pretrain.critic_epochs=1",
    "pretrain.batch_size=16",
    "train.iterations=3",
    "train.batch_size=4",
    "train.log_every=0",
    "eval.seeds=0",
]


def pytest_collection_modifyitems(config: pytest.Config, items: List[pytest.Item]) -> None:
    # Skip slow tests unless explicitly requested
    if os.environ.get("L2A_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set L2A_RUN_SLOW=1 to run desk-scale tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def tiny_settings() -> List[str]:
    return list(TINY_SETTINGS)


@pytest.fixture
def tiny_config() -> AppConfig:
    return load_config(overrides=TINY_SETTINGS)


@pytest.fixture(scope="session")
def tiny_domains() -> List[DomainDataset]:
    return build_domains(load_config(overrides=TINY_SETTINGS))


@pytest.fixture
def float64() -> Iterator[None]:
    previous = np.dtype(get_dtype()).name
    set_precision("float64")
    yield
    set_precision(previous)


class TinyPretrained(NamedTuple):
    cfg: AppConfig
    train: List[DomainDataset]
    val: List[DomainDataset]
    yhat: TaskClassifierWeights
    critic: CriticWeights


@pytest.fixture(scope="session")
def tiny_pretrained(tiny_domains: List[DomainDataset]) -> TinyPretrained:
    # Three tiny sources with one pretraining epoch each
    cfg = load_config(overrides=TINY_SETTINGS)
    spec = split_spec_from_config(cfg.data)
    splits = [make_splits(ds, spec) for ds in tiny_domains[:3]]
    train = [t for t, _ in splits]
    val = [v for _, v in splits]
    yhat = pretrain_task_classifier(cfg, train, val).weights
    critic = pretrain_critic(cfg, train, val).weights
    return TinyPretrained(cfg, train, val, yhat, critic)  # type: ignore[arg-type]
