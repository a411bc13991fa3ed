"""
src/data/__init__.py

Package initialization for multi-domain data: glyph corpus, domain transforms, IDX ingestion,
splits, batch sampling and the dataset cache.

No top-level functions or classes.
"""

from .cache import load_dataset, save_dataset
from .glyphs import NUM_CLASSES, generate_glyph_dataset
from .idx import IMAGE_MAGIC, LABEL_MAGIC, load_idx_base, parse_idx, parse_idx_labels, write_idx
from .sampler import BatchSampler, sample_batch, split_halves
from .splits import make_splits, split_spec_from_config
from .transforms import PRESETS, apply_domain_transform, build_domains, load_base
from .types import (
    BackgroundKind,
    DatasetCacheError,
    DomainDataset,
    DomainTransform,
    IDXFormatError,
    LabeledBatch,
    SamplerError,
    SplitError,
    SplitSpec,
)

__all__ = [
    "IMAGE_MAGIC",
    "LABEL_MAGIC",
    "NUM_CLASSES",
    "PRESETS",
    "BackgroundKind",
    "BatchSampler",
    "DatasetCacheError",
    "DomainDataset",
    "DomainTransform",
    "IDXFormatError",
    "LabeledBatch",
    "SamplerError",
    "SplitError",
    "SplitSpec",
    "apply_domain_transform",
    "build_domains",
    "generate_glyph_dataset",
    "load_base",
    "load_dataset",
    "load_idx_base",
    "make_splits",
    "parse_idx",
    "parse_idx_labels",
    "sample_batch",
    "save_dataset",
    "split_halves",
    "split_spec_from_config",
    "write_idx",
]
