"""
src/data/glyphs.py

Procedural glyph corpus: ten classes of anti-aliased stroke patterns, each a fixed per-class
skeleton (seven-segment strokes plus one class-specific diagonal, with endpoints perturbed by the
geometry seed) rendered with per-sample rotation, translation and thickness jitter.

Top-level declarations:
- NUM_CLASSES: Number of glyph classes
- MIN_PER_CLASS: Smallest accepted n_per_class
- class_skeletons: Per-class stroke endpoints in glyph-box units
- render_glyph: Rasterize one skeleton with a given pose
- generate_glyph_dataset: Build the grayscale base dataset replicated to three channels
"""

from __future__ import annotations

import logging
from typing import List

import numpy as np

from .types import DomainDataset

logger = logging.getLogger(__name__)

NUM_CLASSES = 10
MIN_PER_CLASS = 20

MAX_ROTATION_DEG = 15.0
MAX_SHIFT_FRACTION = 3.0 / 32.0  # 3 px at 32 x 32
SKELETON_JITTER = 0.08

# Seven-segment corners in a glyph box spanning x in [-1, 1], y in [-1, 1] (y down)
_CORNERS = {
    "tl": (-1.0, -1.0),
    "tr": (1.0, -1.0),
    "ml": (-1.0, 0.0),
    "mr": (1.0, 0.0),
    "bl": (-1.0, 1.0),
    "br": (1.0, 1.0),
}
_SEGMENTS = {
    "a": ("tl", "tr"),
    "b": ("tr", "mr"),
    "c": ("mr", "br"),
    "d": ("bl", "br"),
    "e": ("ml", "bl"),
    "f": ("tl", "ml"),
    "g": ("ml", "mr"),
}
_DIGITS = ["abcdef", "bc", "abged", "abgcd", "fgbc", "afgcd", "afgedc", "abc", "abcdefg", "abcdfg"]
# One diagonal per class keeps classes distinct even where segment sets are close
_DIAGONALS = [
    ("tr", "bl"), ("tl", "mr"), ("mr", "bl"), ("tl", "br"), ("ml", "tr"),
    ("tr", "ml"), ("tl", "ml"), ("tr", "bl"), ("ml", "br"), ("tl", "mr"),
]


def class_skeletons(geometry_seed: int) -> List[np.ndarray]:
    # One (S, 2, 2) array of segment endpoints per class, fixed by the geometry seed
    rng = np.random.default_rng(geometry_seed)
    skeletons = []
    for digit, diagonal in zip(_DIGITS, _DIAGONALS):
        corners = {
            name: np.array(xy) + rng.uniform(-SKELETON_JITTER, SKELETON_JITTER, size=2)
            for name, xy in _CORNERS.items()
        }
        strokes = [(corners[_SEGMENTS[s][0]], corners[_SEGMENTS[s][1]]) for s in digit]
        strokes.append((corners[diagonal[0]], corners[diagonal[1]]))
        skeletons.append(np.array(strokes))
    return skeletons


def render_glyph(
    skeleton: np.ndarray, size: int, angle_deg: float, shift: np.ndarray, thickness: float
) -> np.ndarray:
    """
    Rasterize a skeleton to a size x size grayscale image in [0, 1].

    The glyph box maps to a 0.45 x 0.6 fraction of the canvas, is rotated by angle_deg about the
    centre, then shifted by `shift` pixels. Intensity falls off linearly over one pixel at the
    stroke edge, which anti-aliases the strokes.
    """
    half_w, half_h = 0.22 * size, 0.3 * size
    theta = np.deg2rad(angle_deg)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    centre = np.array([(size - 1) / 2.0, (size - 1) / 2.0]) + shift

    ends = skeleton * np.array([half_w, half_h])  # (S, 2, 2) in pixels
    ends = ends @ rot.T + centre
    a, b = ends[:, 0, :], ends[:, 1, :]

    ys, xs = np.mgrid[0:size, 0:size]
    pixels = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)  # (P, 2)

    ab = b - a
    length_sq = np.maximum((ab * ab).sum(axis=1), 1e-12)
    rel = pixels[None, :, :] - a[:, None, :]
    t = np.clip((rel * ab[:, None, :]).sum(axis=2) / length_sq[:, None], 0.0, 1.0)
    nearest = a[:, None, :] + t[..., None] * ab[:, None, :]
    dist = np.sqrt(((pixels[None, :, :] - nearest) ** 2).sum(axis=2)).min(axis=0)

    intensity = np.clip(thickness / 2.0 + 0.5 - dist, 0.0, 1.0)
    return intensity.reshape(size, size)


def generate_glyph_dataset(n_per_class: int, geometry_seed: int, image_size: int = 32) -> DomainDataset:
    # Base corpus; samples are interleaved by class (label of sample i is i mod 10)
    if n_per_class < MIN_PER_CLASS:
        raise ValueError(f"n_per_class must be >= {MIN_PER_CLASS}, got {n_per_class}")

    skeletons = class_skeletons(geometry_seed)
    rng = np.random.default_rng([geometry_seed, 1])
    total = n_per_class * NUM_CLASSES
    base_thickness = max(1.0, image_size / 16.0)
    max_shift = MAX_SHIFT_FRACTION * image_size

    gray = np.empty((total, image_size, image_size))
    labels = np.tile(np.arange(NUM_CLASSES), n_per_class)
    for i, label in enumerate(labels):
        angle = rng.uniform(-MAX_ROTATION_DEG, MAX_ROTATION_DEG)
        shift = rng.uniform(-max_shift, max_shift, size=2)
        thickness = base_thickness * rng.uniform(0.8, 1.3)
        gray[i] = render_glyph(skeletons[label], image_size, angle, shift, thickness)

    images = np.repeat((gray * 2.0 - 1.0)[:, None, :, :], 3, axis=1)
    logger.debug(f"Rendered {total} glyphs at {image_size}x{image_size} (geometry seed {geometry_seed})")
    return DomainDataset(
        index=-1,
        name="glyphs",
        images=images,
        labels=labels.astype(np.int64),
        provenance={
            "source": "procedural",
            "n_per_class": n_per_class,
            "geometry_seed": geometry_seed,
            "image_size": image_size,
        },
    )
