"""
src/data/types.py

Pydantic models for multi-domain datasets, domain transforms, split specifications and batches,
plus the data-layer exceptions.

Top-level declarations:
- IDXFormatError: Bad magic, truncated payload or image/label count mismatch in IDX files
- SplitError: Class too small to stratify or invalid fractions
- SamplerError: Invalid batch size for a split
- DatasetCacheError: Cached dataset disagrees with its provenance sidecar
- BackgroundKind: Background patterns a DomainTransform can add
- DomainTransform: Parametric style change (tint, background, contrast, polarity)
- SplitSpec: Train/val fractions and split seed
- DomainDataset: Images, labels and provenance for one domain
- LabeledBatch: A sampled mini-batch with its source-domain index
"""

from __future__ import annotations

import hashlib
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class IDXFormatError(ValueError):
    # Raised on malformed IDX files; expected/actual carry lengths or counts when relevant
    def __init__(
        self,
        path: str,
        reason: str,
        expected: Optional[int] = None,
        actual: Optional[int] = None,
    ):
        self.path = path
        self.expected = expected
        self.actual = actual
        detail = f" (expected {expected}, got {actual})" if expected is not None else ""
        super().__init__(f"Invalid IDX file {path}: {reason}{detail}")


class SplitError(ValueError):
    pass


class SamplerError(ValueError):
    pass


class DatasetCacheError(ValueError):
    pass


class BackgroundKind(str, Enum):
    FLAT = "flat"
    LINEAR_GRADIENT = "linear-gradient"
    CHECKER = "checker"
    GAUSSIAN_NOISE = "gaussian-noise"


class DomainTransform(BaseModel):
    # Per-channel affine tint, additive background behind the strokes, contrast exponent, polarity
    name: str = "identity"
    gain: List[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0])
    bias: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    background: BackgroundKind = BackgroundKind.FLAT
    amplitude: float = 0.0
    contrast: float = 1.0
    polarity: bool = False
    seed: int = 0

    @field_validator("gain", "bias")
    @classmethod
    def check_channels(cls, v: List[float]) -> List[float]:
        if len(v) != 3:
            raise ValueError("gain and bias need one entry per channel (3)")
        return v

    @field_validator("contrast")
    @classmethod
    def check_contrast(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("contrast exponent must be > 0")
        return v

    @property
    def is_identity(self) -> bool:
        return (
            self.gain == [1.0, 1.0, 1.0]
            and self.bias == [0.0, 0.0, 0.0]
            and self.amplitude == 0.0
            and self.contrast == 1.0
            and not self.polarity
        )


class SplitSpec(BaseModel):
    train_fraction: float = 0.9
    val_fraction: float = 0.1
    seed: int = 11

    @model_validator(mode="after")
    def check_fractions(self) -> "SplitSpec":
        if self.train_fraction <= 0 or self.val_fraction <= 0:
            raise ValueError("split fractions must be positive")
        if self.train_fraction + self.val_fraction > 1.0 + 1e-12:
            raise ValueError("split fractions must sum to at most 1")
        return self


class DomainDataset(BaseModel):
    # One domain's images (N x 3 x H x W in [-1, 1]) and labels; never mutated after construction
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    index: int
    name: str
    images: np.ndarray
    labels: np.ndarray
    provenance: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_arrays(self) -> "DomainDataset":
        if self.images.ndim != 4 or self.images.shape[1] != 3:
            raise ValueError(f"images must be N x 3 x H x W, got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError(f"labels shape {self.labels.shape} does not match {self.images.shape[0]} images")
        if not np.isfinite(self.images).all():
            raise ValueError("images contain non-finite values")
        if self.images.size and (self.images.min() < -1.0 or self.images.max() > 1.0):
            raise ValueError("images must lie in [-1, 1]")
        self.images.setflags(write=False)
        self.labels.setflags(write=False)
        return self

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_size(self) -> int:
        return int(self.images.shape[-1])

    def subset(self, indices: np.ndarray, part: str) -> "DomainDataset":
        return DomainDataset(
            index=self.index,
            name=self.name,
            images=self.images[indices].copy(),
            labels=self.labels[indices].copy(),
            provenance={**self.provenance, "part": part},
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.images, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.labels, dtype="<i8").tobytes())
        return h.hexdigest()


class LabeledBatch(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    images: np.ndarray
    labels: np.ndarray
    domain: int
    indices: np.ndarray

    def __len__(self) -> int:
        return int(self.images.shape[0])
