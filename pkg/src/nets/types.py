"""
src/nets/types.py

Pydantic models for network architectures, weight sets and domain codes, plus weight-file
exceptions.

Top-level declarations:
- WeightsFormatError / WeightsVersionError / WeightsChecksumError: L2AW container failures
- DomainCode: One-hot domain indicator of length K_s + K_n
- GeneratorSpec / ClassifierSpec / CriticSpec: Architecture descriptions
- WeightSet: Immutable named parameter arrays for one network
- GeneratorWeights / TaskClassifierWeights / CriticWeights: Typed weight sets
- Params: Mapping of parameter names to tensors used by forward functions
"""

from __future__ import annotations

from typing import Dict, List, Mapping, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.tensor import Tensor

Params = Mapping[str, Tensor]


class WeightsFormatError(ValueError):
    # Raised when an L2AW file is malformed (bad magic, truncated header, unknown names)
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"Invalid weights file {path}: {reason}")


class WeightsVersionError(WeightsFormatError):
    # Raised when the version field is not the supported one
    def __init__(self, path: str, version: int):
        self.version = version
        super().__init__(path, f"unsupported version {version}")


class WeightsChecksumError(WeightsFormatError):
    # Raised when the trailing CRC32 does not match the preceding bytes
    def __init__(self, path: str, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(path, f"checksum mismatch (stored {expected:#010x}, computed {actual:#010x})")


class DomainCode(BaseModel):
    # One-hot domain indicator; sources occupy [0, K_s), novel domains [K_s, K_s + K_n)
    index: int
    length: int

    @model_validator(mode="after")
    def check_index(self) -> "DomainCode":
        if self.length < 1 or not 0 <= self.index < self.length:
            raise ValueError(f"DomainCode index {self.index} outside [0, {self.length})")
        return self

    @classmethod
    def for_index(cls, index: int, num_source: int, num_novel: int) -> "DomainCode":
        return cls(index=index, length=num_source + num_novel)

    @property
    def one_hot(self) -> np.ndarray:
        vec = np.zeros(self.length)
        vec[self.index] = 1.0
        return vec


class GeneratorSpec(BaseModel):
    # Conv-deconv generator: stem, two stride-2 downs, two residual blocks, two stride-2 ups, output
    image_channels: int = 3
    num_domains: int = 6
    widths: List[int] = Field(default_factory=lambda: [16, 32, 64])


class ClassifierSpec(BaseModel):
    # Four 3x3 conv + relu + 2x2 max-pool stages, then a linear head
    image_channels: int = 3
    image_size: int = 32
    width: int = 32
    num_classes: int = 10

    @property
    def feature_dim(self) -> int:
        side = self.image_size // 16
        return self.width * side * side


class CriticSpec(BaseModel):
    # Three stride-2 3x3 convs + relu, global average pool, linear embedding, domain head
    image_channels: int = 3
    widths: List[int] = Field(default_factory=lambda: [16, 32, 64])
    embedding_dim: int = 64
    num_domains: int = 3


ArchSpec = Union[GeneratorSpec, ClassifierSpec, CriticSpec]


class WeightSet(BaseModel):
    # Immutable named parameter arrays; updates produce a new WeightSet
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    kind: str
    spec: ArchSpec
    arrays: Dict[str, np.ndarray]

    def tensors(self, trainable: bool) -> Dict[str, Tensor]:
        # Fresh tensors; trainable=False freezes them (exact zero parameter gradients)
        return {
            name: Tensor(value, requires_grad=trainable, name=name) for name, value in self.arrays.items()
        }

    def replace(self, arrays: Mapping[str, np.ndarray]) -> "WeightSet":
        missing = set(self.arrays) - set(arrays)
        if missing:
            raise KeyError(f"Replacement arrays missing {sorted(missing)}")
        return type(self)(kind=self.kind, spec=self.spec, arrays={k: np.array(arrays[k]) for k in self.arrays})

    def num_parameters(self) -> int:
        return int(sum(v.size for v in self.arrays.values()))


class GeneratorWeights(WeightSet):
    kind: str = "generator"


class TaskClassifierWeights(WeightSet):
    kind: str = "classifier"


class CriticWeights(WeightSet):
    kind: str = "critic"
