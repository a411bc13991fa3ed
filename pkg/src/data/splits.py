"""
src/data/splits.py

Stratified, seed-deterministic train/validation splits.

Top-level declarations:
- split_spec_from_config: SplitSpec from the data section
- make_splits: (train, val) datasets, disjoint and stratified by class
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from src.config import DataConfig

from .types import DomainDataset, SplitError, SplitSpec


def split_spec_from_config(cfg: DataConfig) -> SplitSpec:
    return SplitSpec(train_fraction=cfg.train_fraction, val_fraction=cfg.val_fraction, seed=cfg.split_seed)


def make_splits(ds: DomainDataset, spec: SplitSpec) -> Tuple[DomainDataset, DomainDataset]:
    # Per class: permute with the split seed, take round(f * n_c) for train, then for val
    rng = np.random.default_rng(spec.seed)
    train_parts, val_parts = [], []
    for label in np.unique(ds.labels):
        members = rng.permutation(np.flatnonzero(ds.labels == label))
        n_train = int(round(spec.train_fraction * len(members)))
        n_val = min(int(round(spec.val_fraction * len(members))), len(members) - n_train)
        if n_train < 1 or n_val < 1:
            raise SplitError(
                f"class {int(label)} of domain '{ds.name}' has {len(members)} samples; "
                f"too few to stratify with fractions ({spec.train_fraction}, {spec.val_fraction})"
            )
        train_parts.append(members[:n_train])
        val_parts.append(members[n_train : n_train + n_val])

    train_idx = np.sort(np.concatenate(train_parts))
    val_idx = np.sort(np.concatenate(val_parts))
    return ds.subset(train_idx, "train"), ds.subset(val_idx, "val")
