"""
tests/test_data.py

Unit tests for multi-domain data: the procedural glyph corpus, domain transforms and presets,
IDX ingestion, stratified splits, batch sampling and the dataset cache.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import List

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from src.config import AppConfig, ConfigError, load_config
from src.data import (
    PRESETS,
    BatchSampler,
    DatasetCacheError,
    DomainDataset,
    DomainTransform,
    IDXFormatError,
    SamplerError,
    SplitError,
    SplitSpec,
    apply_domain_transform,
    build_domains,
    generate_glyph_dataset,
    load_dataset,
    load_idx_base,
    make_splits,
    parse_idx,
    parse_idx_labels,
    sample_batch,
    save_dataset,
    split_halves,
    write_idx,
)


MNIST_IMAGES = Path(__file__).parent / "fixtures" / "t10k-images-idx3-ubyte"


@pytest.fixture(scope="module")
def glyphs() -> DomainDataset:
    return generate_glyph_dataset(20, 7, image_size=16)


class TestGlyphs:
    # Procedural base corpus

    def test_shape_range_and_labels(self, glyphs: DomainDataset) -> None:
        assert glyphs.images.shape == (200, 3, 16, 16)
        assert glyphs.images.min() >= -1.0 and glyphs.images.max() <= 1.0
        assert_array_equal(glyphs.labels[:12], [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 0, 1])
        assert_array_equal(np.bincount(glyphs.labels), np.full(10, 20))

    def test_channels_are_identical_grayscale(self, glyphs: DomainDataset) -> None:
        assert_array_equal(glyphs.images[:, 0], glyphs.images[:, 2])

    def test_deterministic_for_a_seed(self, glyphs: DomainDataset) -> None:
        assert generate_glyph_dataset(20, 7, image_size=16).digest() == glyphs.digest()
        assert generate_glyph_dataset(20, 8, image_size=16).digest() != glyphs.digest()

    def test_classes_differ(self, glyphs: DomainDataset) -> None:
        means = [glyphs.images[glyphs.labels == c].mean(axis=0) for c in range(10)]
        assert all(not np.allclose(means[0], m) for m in means[1:])

    def test_too_few_per_class(self) -> None:
        with pytest.raises(ValueError):
            generate_glyph_dataset(5, 7)

    def test_images_are_read_only(self, glyphs: DomainDataset) -> None:
        with pytest.raises(ValueError):
            glyphs.images[0, 0, 0, 0] = 0.0


class TestTransforms:
    # Domain transforms and the preset registry

    def test_identity_is_bit_exact(self, glyphs: DomainDataset) -> None:
        out = apply_domain_transform(glyphs, PRESETS["plain"], index=0)
        assert_array_equal(out.images, glyphs.images)
        assert out.name == "plain"
        assert out.provenance["transform"]["name"] == "plain"

    @pytest.mark.parametrize("name", ["ember", "inverse", "static", "neon", "slate"])
    def test_presets_change_images_and_keep_labels(self, glyphs: DomainDataset, name: str) -> None:
        out = apply_domain_transform(glyphs, PRESETS[name], index=3)
        assert out.index == 3
        assert not np.array_equal(out.images, glyphs.images)
        assert out.images.min() >= -1.0 and out.images.max() <= 1.0
        assert_array_equal(out.labels, glyphs.labels)

    def test_polarity_inverts(self, glyphs: DomainDataset) -> None:
        out = apply_domain_transform(glyphs, DomainTransform(name="neg", polarity=True))
        assert_array_equal(out.images, -glyphs.images)

    def test_invalid_transform_parameters(self) -> None:
        with pytest.raises(ValueError):
            DomainTransform(gain=[1.0, 1.0])
        with pytest.raises(ValueError):
            DomainTransform(contrast=0.0)

    def test_build_domains_follows_config_order(self, tiny_config: AppConfig) -> None:
        domains = build_domains(tiny_config)
        assert [d.name for d in domains] == ["plain", "ember", "inverse", "static"]
        assert [d.index for d in domains] == [0, 1, 2, 3]

    def test_unknown_preset(self) -> None:
        cfg = load_config(overrides=["domains.names=plain,sepia", "data.n_per_class=20", "model.image_size=16"])
        with pytest.raises(ConfigError):
            build_domains(cfg)

    def test_duplicate_preset(self) -> None:
        cfg = load_config(overrides=["domains.names=plain,plain", "data.n_per_class=20", "model.image_size=16"])
        with pytest.raises(ConfigError):
            build_domains(cfg)


def _write_raw(path: Path, header: bytes, payload: bytes) -> Path:
    path.write_bytes(header + payload)
    return path


class TestIDX:
    # IDX parsing, writing and error reporting

    def test_parse_maps_pixels_and_replicates_channels(self, tmp_path: Path) -> None:
        pixels = np.array([[[0, 255], [127, 51]]], dtype=np.uint8)
        path = _write_raw(tmp_path / "img.idx", struct.pack(">IIII", 2051, 1, 2, 2), pixels.tobytes())
        images = parse_idx(path).data
        assert images.shape == (1, 3, 2, 2)
        assert images[0, 0, 0, 0] == -1.0
        assert images[0, 0, 0, 1] == 1.0
        assert_array_equal(images[:, 0], images[:, 1])

    def test_round_trip_uint8(self, tmp_path: Path) -> None:
        rng = np.random.default_rng(0)
        pixels = rng.integers(0, 256, size=(4, 5, 3), dtype=np.uint8)
        labels = np.array([3, 1, 4, 1], dtype=np.uint8)
        write_idx(tmp_path / "img.idx", pixels)
        write_idx(tmp_path / "lab.idx", labels)
        restored = np.rint((parse_idx(tmp_path / "img.idx").data[:, 0] + 1.0) * 127.5).astype(np.uint8)
        assert_array_equal(restored, pixels)
        assert_array_equal(parse_idx_labels(tmp_path / "lab.idx"), [3, 1, 4, 1])

    def test_bad_magic(self, tmp_path: Path) -> None:
        path = _write_raw(tmp_path / "img.idx", struct.pack(">IIII", 2049, 1, 1, 1), b"\x00")
        with pytest.raises(IDXFormatError) as info:
            parse_idx(path)
        assert info.value.expected == 2051

    def test_truncated_payload_reports_lengths(self, tmp_path: Path) -> None:
        path = _write_raw(tmp_path / "img.idx", struct.pack(">IIII", 2051, 2, 2, 2), bytes(5))
        with pytest.raises(IDXFormatError) as info:
            parse_idx(path)
        assert info.value.expected == 16 + 8
        assert info.value.actual == 16 + 5

    def test_truncated_header(self, tmp_path: Path) -> None:
        path = _write_raw(tmp_path / "lab.idx", b"\x00\x00", b"")
        with pytest.raises(IDXFormatError):
            parse_idx_labels(path)

    def test_label_outside_class_range(self, tmp_path: Path) -> None:
        write_idx(tmp_path / "lab.idx", np.array([3, 10, 4], dtype=np.uint8))
        with pytest.raises(IDXFormatError) as info:
            parse_idx_labels(tmp_path / "lab.idx")
        assert info.value.actual == 10
        assert_array_equal(parse_idx_labels(tmp_path / "lab.idx", num_classes=11), [3, 10, 4])

    def test_load_idx_base_pads_to_model_size(self, tmp_path: Path) -> None:
        pixels = np.full((3, 12, 12), 255, dtype=np.uint8)
        write_idx(tmp_path / "img.idx", pixels)
        write_idx(tmp_path / "lab.idx", np.array([0, 1, 2], dtype=np.uint8))
        base = load_idx_base(tmp_path / "img.idx", tmp_path / "lab.idx", image_size=16)
        assert base.images.shape == (3, 3, 16, 16)
        assert base.images[0, 0, 0, 0] == -1.0
        assert base.images[0, 0, 8, 8] == 1.0
        assert base.provenance["source"] == "idx"

    @pytest.mark.skipif(not MNIST_IMAGES.exists(), reason="no MNIST IDX file under tests/fixtures")
    def test_real_mnist_header(self) -> None:
        raw = MNIST_IMAGES.read_bytes()
        magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
        assert (magic, rows, cols) == (2051, 28, 28)
        assert parse_idx(MNIST_IMAGES).shape == (count, 3, 28, 28)

    def test_count_mismatch(self, tmp_path: Path) -> None:
        write_idx(tmp_path / "img.idx", np.zeros((3, 4, 4), dtype=np.uint8))
        write_idx(tmp_path / "lab.idx", np.array([0, 1], dtype=np.uint8))
        with pytest.raises(IDXFormatError, match="count mismatch"):
            load_idx_base(tmp_path / "img.idx", tmp_path / "lab.idx", image_size=16)


class TestSplits:
    # Stratified, disjoint, seed-deterministic

    def test_disjoint_and_stratified(self, glyphs: DomainDataset) -> None:
        train, val = make_splits(glyphs, SplitSpec(train_fraction=0.9, val_fraction=0.1, seed=11))
        assert len(train) == 180 and len(val) == 20
        assert_array_equal(np.bincount(val.labels), np.full(10, 2))
        assert train.provenance["part"] == "train"

    def test_same_seed_same_split(self, glyphs: DomainDataset) -> None:
        spec = SplitSpec(seed=11)
        assert make_splits(glyphs, spec)[1].digest() == make_splits(glyphs, spec)[1].digest()

    def test_splits_share_no_images(self, glyphs: DomainDataset) -> None:
        train, val = make_splits(glyphs, SplitSpec())
        train_rows = {row.tobytes() for row in train.images}
        assert not any(row.tobytes() in train_rows for row in val.images)

    def test_class_too_small_to_stratify(self, glyphs: DomainDataset) -> None:
        with pytest.raises(SplitError):
            make_splits(glyphs, SplitSpec(train_fraction=0.99, val_fraction=0.01))

    def test_fractions_over_one(self) -> None:
        with pytest.raises(ValueError):
            SplitSpec(train_fraction=0.8, val_fraction=0.3)


class TestSampler:
    # Epoch-based sampling and halving

    def test_epoch_covers_every_index_once(self) -> None:
        sampler = BatchSampler(12, 4, seed=0)
        seen: List[int] = []
        for _ in range(3):
            seen += sampler.next_indices().tolist()
        assert sorted(seen) == list(range(12))
        sampler.next_indices()
        assert sampler.epoch == 1

    def test_tail_is_dropped(self) -> None:
        sampler = BatchSampler(10, 4, seed=0)
        sampler.next_indices()
        sampler.next_indices()
        sampler.next_indices()
        assert sampler.epoch == 1

    def test_same_seed_same_stream(self) -> None:
        a, b = BatchSampler(20, 4, seed=[3, 1]), BatchSampler(20, 4, seed=[3, 1])
        for _ in range(8):
            assert_array_equal(a.next_indices(), b.next_indices())

    def test_invalid_sizes(self) -> None:
        with pytest.raises(SamplerError):
            BatchSampler(10, 3, seed=0)
        with pytest.raises(SamplerError):
            BatchSampler(2, 4, seed=0)

    def test_batch_and_halves(self, glyphs: DomainDataset) -> None:
        batch = sample_batch(glyphs, BatchSampler(len(glyphs), 6, seed=0))
        assert batch.images.shape == (6, 3, 16, 16)
        assert_array_equal(batch.labels, glyphs.labels[batch.indices])
        first, second = split_halves(batch)
        assert len(first) == len(second) == 3
        assert not set(first.indices) & set(second.indices)

    def test_sampler_must_match_split(self, glyphs: DomainDataset) -> None:
        with pytest.raises(SamplerError):
            sample_batch(glyphs, BatchSampler(10, 2, seed=0))


class TestCache:
    # Dataset cache with provenance sidecar

    def test_round_trip(self, tmp_path: Path, glyphs: DomainDataset) -> None:
        path = save_dataset(glyphs, tmp_path / "glyphs.l2aw")
        loaded = load_dataset(path)
        assert loaded.digest() == glyphs.digest()
        assert loaded.name == "glyphs"
        assert loaded.provenance == glyphs.provenance

    def test_sidecar_digest_mismatch(self, tmp_path: Path, glyphs: DomainDataset) -> None:
        path = save_dataset(glyphs, tmp_path / "glyphs.l2aw")
        sidecar = tmp_path / "glyphs.l2aw.provenance.json"
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        meta["digest"] = "0" * 64
        sidecar.write_text(json.dumps(meta), encoding="utf-8")
        with pytest.raises(DatasetCacheError):
            load_dataset(path)

    def test_missing_sidecar(self, tmp_path: Path, glyphs: DomainDataset) -> None:
        path = save_dataset(glyphs, tmp_path / "glyphs.l2aw")
        (tmp_path / "glyphs.l2aw.provenance.json").unlink()
        with pytest.raises(DatasetCacheError):
            load_dataset(path)
