"""
src/data/transforms.py

Parametric domain transforms applied to a base corpus, the named presets that make up the default
domain registry, and the builder that turns a configuration into the list of domains.

Transform order: polarity, contrast, background (weighted by 1 - ink so strokes stay legible),
per-channel tint, clamp to [-1, 1]. Steps whose parameters are the identity are skipped, so an
identity transform reproduces the base images bit-exactly.

Top-level declarations:
- PRESETS: Named DomainTransforms (plain, ember, inverse, static, neon, slate)
- background_pattern: Background plane(s) for a transform
- apply_domain_transform: Apply one transform to a base dataset
- load_base: Procedural glyphs or IDX-backed base, per configuration
- build_domains: Ordered domain list from the configured preset names
"""

from __future__ import annotations

import logging
from typing import Dict, List

import numpy as np

from src.config import AppConfig, ConfigError

from .glyphs import generate_glyph_dataset
from .idx import load_idx_base
from .types import BackgroundKind, DomainDataset, DomainTransform

logger = logging.getLogger(__name__)

PRESETS: Dict[str, DomainTransform] = {
    "plain": DomainTransform(name="plain"),
    "ember": DomainTransform(
        name="ember",
        gain=[1.0, 0.55, 0.25],
        bias=[0.15, -0.1, -0.35],
        background=BackgroundKind.LINEAR_GRADIENT,
        amplitude=0.4,
        contrast=0.8,
        seed=101,
    ),
    "inverse": DomainTransform(
        name="inverse",
        gain=[0.3, 0.8, 1.0],
        bias=[-0.2, 0.1, 0.2],
        background=BackgroundKind.CHECKER,
        amplitude=0.3,
        polarity=True,
        seed=202,
    ),
    "static": DomainTransform(
        name="static",
        gain=[0.9, 1.0, 0.4],
        bias=[0.1, 0.2, -0.2],
        background=BackgroundKind.GAUSSIAN_NOISE,
        amplitude=0.35,
        contrast=1.5,
        seed=303,
    ),
    "neon": DomainTransform(
        name="neon",
        gain=[0.4, 1.0, 0.6],
        bias=[-0.3, 0.0, 0.3],
        background=BackgroundKind.FLAT,
        amplitude=-0.3,
        contrast=0.6,
        seed=404,
    ),
    "slate": DomainTransform(
        name="slate",
        gain=[0.6, 0.6, 0.7],
        bias=[0.0, 0.0, 0.05],
        background=BackgroundKind.CHECKER,
        amplitude=0.15,
        contrast=2.0,
        polarity=True,
        seed=505,
    ),
}


def background_pattern(t: DomainTransform, count: int, size: int) -> np.ndarray:
    # (1 or count, size, size) plane in [-1, 1] before amplitude scaling
    if t.background == BackgroundKind.FLAT:
        return np.ones((1, size, size))
    if t.background == BackgroundKind.CHECKER:
        cell = max(1, size // 8)
        ys, xs = np.mgrid[0:size, 0:size]
        return (((ys // cell + xs // cell) % 2) * 2.0 - 1.0)[None]
    rng = np.random.default_rng(t.seed)
    if t.background == BackgroundKind.LINEAR_GRADIENT:
        angle = rng.uniform(0.0, 2.0 * np.pi)
        ys, xs = np.mgrid[0:size, 0:size] / max(size - 1, 1) * 2.0 - 1.0
        ramp = np.cos(angle) * xs + np.sin(angle) * ys
        return (ramp / max(np.abs(ramp).max(), 1e-12))[None]
    return np.clip(rng.standard_normal((count, size, size)), -1.0, 1.0)


def apply_domain_transform(base: DomainDataset, t: DomainTransform, index: int = 0) -> DomainDataset:
    x = np.array(base.images, copy=True)
    if not t.is_identity:
        ink = (base.images.mean(axis=1) + 1.0) / 2.0  # (N, H, W) stroke coverage in [0, 1]
        if t.polarity:
            x = -x
        if t.contrast != 1.0:
            x = ((x + 1.0) / 2.0) ** t.contrast * 2.0 - 1.0
        if t.amplitude != 0.0:
            plane = background_pattern(t, len(base), base.image_size)
            x = x + (t.amplitude * plane * (1.0 - ink))[:, None, :, :]
        if t.gain != [1.0, 1.0, 1.0] or t.bias != [0.0, 0.0, 0.0]:
            gain = np.array(t.gain)[None, :, None, None]
            bias = np.array(t.bias)[None, :, None, None]
            x = x * gain + bias
        x = np.clip(x, -1.0, 1.0)

    return DomainDataset(
        index=index,
        name=t.name,
        images=x,
        labels=np.array(base.labels, copy=True),
        provenance={"base": dict(base.provenance), "transform": t.model_dump(mode="json")},
    )


def load_base(cfg: AppConfig) -> DomainDataset:
    if cfg.domains.base == "idx":
        return load_idx_base(
            cfg.domains.idx_images,  # type: ignore[arg-type]
            cfg.domains.idx_labels,  # type: ignore[arg-type]
            limit=cfg.domains.idx_limit,
            image_size=cfg.model.image_size,
            num_classes=cfg.model.num_classes,
        )
    return generate_glyph_dataset(cfg.data.n_per_class, cfg.data.geometry_seed, cfg.model.image_size)


def build_domains(cfg: AppConfig) -> List[DomainDataset]:
    # One dataset per configured name; the domain index is the position in domains.names
    unknown = [name for name in cfg.domains.names if name not in PRESETS]
    if unknown:
        raise ConfigError(f"Unknown domain presets {unknown}; known: {sorted(PRESETS)}", key="domains.names")
    if len(set(cfg.domains.names)) != len(cfg.domains.names):
        raise ConfigError("domains.names lists a preset twice", key="domains.names")

    base = load_base(cfg)
    domains = [apply_domain_transform(base, PRESETS[name], index=i) for i, name in enumerate(cfg.domains.names)]
    logger.info(f"Built {len(domains)} domains from {base.name}: {', '.join(cfg.domains.names)}")
    return domains
