"""
src/evaluation/embeddings.py

Domain-embedding export: critic features of source validation samples, generated samples for
every novel label, and target samples, projected to two dimensions with PCA fitted on the pooled
set.

PCA is a thin SVD of the centred features; each component's sign is fixed so that its
largest-magnitude entry is positive, which makes the projection deterministic.

Top-level declarations:
- pca_2d: (coords, components, mean) for an N x d matrix
- export_embeddings: Build the EmbeddingDump and optionally write its CSV
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.data import DomainDataset
from src.nets import CriticWeights, DomainCode, GeneratorWeights, WeightSet, critic_features, generator_forward
from src.tensor import Tensor

from .reports import write_embeddings_csv
from .types import EmbeddingDump, EmbeddingExportError

logger = logging.getLogger(__name__)

MIN_SAMPLES = 3


def pca_2d(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if features.ndim != 2 or features.shape[0] < MIN_SAMPLES or features.shape[1] < 2:
        raise EmbeddingExportError(f"PCA needs at least {MIN_SAMPLES} samples of dimension >= 2, got {features.shape}")
    mean = features.mean(axis=0)
    _, _, vt = np.linalg.svd(features - mean, full_matrices=False)
    components = vt[:2].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return (features - mean) @ components.T, components, mean


def export_embeddings(
    critic: CriticWeights | WeightSet,
    generator: GeneratorWeights | WeightSet,
    sources: Sequence[DomainDataset],
    target: Optional[DomainDataset] = None,
    samples: int = 64,
    out_path: Optional[str | Path] = None,
) -> EmbeddingDump:
    """
    Embed tagged sample groups with the critic and project them with PCA.

    Args:
        critic: Trained critic
        generator: Trained generator; its code length fixes K_n = num_domains - len(sources)
        sources: Source validation splits, in domain-code order
        target: Held-out domain, if it should appear in the plot
        samples: Leading samples taken from each group
        out_path: When set, the CSV is written here

    Returns:
        EmbeddingDump with tags source:<name>, generated:<novel label> and target:<name>
    """
    num_source = len(sources)
    num_novel = generator.spec.num_domains - num_source  # type: ignore[union-attr]
    if num_novel < 1:
        raise EmbeddingExportError(
            f"generator codes {generator.spec.num_domains} domains, not enough for {num_source} sources"  # type: ignore[union-attr]
        )
    phi = critic.tensors(trainable=False)
    g = generator.tensors(trainable=False)

    tags: List[str] = []
    labels: List[np.ndarray] = []
    feats: List[np.ndarray] = []
    for ds in sources:
        n = min(samples, len(ds))
        tags += [f"source:{ds.name}"] * n
        labels.append(ds.labels[:n])
        feats.append(critic_features(phi, ds.images[:n]))
    for j in range(num_novel):
        ds = sources[j % num_source]
        n = min(samples, len(ds))
        code = DomainCode(index=num_source + j, length=num_source + num_novel)
        generated = generator_forward(g, Tensor(ds.images[:n]), code).data
        tags += [f"generated:{j}"] * n
        labels.append(ds.labels[:n])
        feats.append(critic_features(phi, generated))
    if target is not None:
        n = min(samples, len(target))
        tags += [f"target:{target.name}"] * n
        labels.append(target.labels[:n])
        feats.append(critic_features(phi, target.images[:n]))

    features = np.concatenate(feats)
    coords, components, mean = pca_2d(features)
    dump = EmbeddingDump(
        tags=tags,
        labels=np.concatenate(labels),
        coords=coords,
        features=features,
        components=components,
        mean=mean,
    )
    if out_path is not None:
        write_embeddings_csv(dump, out_path)
        logger.info(f"Wrote {len(tags)} embedding rows to {out_path}")
    return dump
