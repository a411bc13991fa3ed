"""
src/data/sampler.py

Deterministic mini-batch sampling: without replacement within an epoch, reshuffled from the
sampler's own generator at each epoch boundary. A batch splits into two disjoint halves, which
serve as the independent draws of the energy-distance estimator.

Top-level declarations:
- BatchSampler: Epoch-based index stream for one split
- sample_batch: Next LabeledBatch from a split
- split_halves: (first half, second half) of a batch
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np

from .types import DomainDataset, LabeledBatch, SamplerError


class BatchSampler:
    # Index stream over n items; a partial tail at the end of an epoch is dropped

    def __init__(self, n: int, size: int, seed: int | Sequence[int]):
        if size < 2 or size % 2:
            raise SamplerError(f"batch size must be even and >= 2, got {size}")
        if size > n:
            raise SamplerError(f"batch size {size} exceeds split size {n}")
        self.n = n
        self.size = size
        self.rng = np.random.default_rng(seed)
        self.epoch = 0
        self._order = self.rng.permutation(n)
        self._position = 0

    def next_indices(self) -> np.ndarray:
        if self._position + self.size > self.n:
            self.epoch += 1
            self._order = self.rng.permutation(self.n)
            self._position = 0
        chunk = self._order[self._position : self._position + self.size]
        self._position += self.size
        return chunk


def sample_batch(split: DomainDataset, sampler: BatchSampler) -> LabeledBatch:
    if sampler.n != len(split):
        raise SamplerError(f"sampler covers {sampler.n} items but split has {len(split)}")
    idx = sampler.next_indices()
    return LabeledBatch(
        images=split.images[idx],
        labels=split.labels[idx],
        domain=split.index,
        indices=idx,
    )


def split_halves(batch: LabeledBatch) -> Tuple[LabeledBatch, LabeledBatch]:
    n = len(batch)
    if n < 2 or n % 2:
        raise SamplerError(f"cannot halve a batch of size {n}")
    h = n // 2
    first, second = slice(0, h), slice(h, n)
    return (
        LabeledBatch(images=batch.images[first], labels=batch.labels[first], domain=batch.domain, indices=batch.indices[first]),
        LabeledBatch(images=batch.images[second], labels=batch.labels[second], domain=batch.domain, indices=batch.indices[second]),
    )
