"""
src/nets/weights.py

Weight initialization and the L2AW binary container shared by weight files, checkpoints and the
dataset cache.

Container layout (little-endian): magic b"L2AW", u32 version (1), u32 tensor count, then per
tensor: u32 name length, UTF-8 name, u32 rank, rank x u64 dims, fp64 payload; finally the CRC32
of every preceding byte as u32.

Top-level declarations:
- init_weights: He-uniform fan-in initialization, reproducible from a seed
- write_container / read_container: Raw named-array L2AW I/O
- save_weights / load_weights: WeightSet round trip (architecture recovered from shapes)
"""

from __future__ import annotations

import logging
import math
import struct
import zlib
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .types import (
    ArchSpec,
    ClassifierSpec,
    CriticSpec,
    CriticWeights,
    GeneratorSpec,
    GeneratorWeights,
    TaskClassifierWeights,
    WeightSet,
    WeightsChecksumError,
    WeightsFormatError,
    WeightsVersionError,
)

logger = logging.getLogger(__name__)

MAGIC = b"L2AW"
VERSION = 1

# (name, shape, init) where init is "he", "he_transposed", "zeros" or "ones"
Layout = List[Tuple[str, Tuple[int, ...], str]]


def _conv(name: str, out_ch: int, in_ch: int, k: int, norm: bool) -> Layout:
    layout: Layout = [(f"{name}.weight", (out_ch, in_ch, k, k), "he"), (f"{name}.bias", (out_ch,), "zeros")]
    if norm:
        layout += [(f"{name}.norm_gain", (out_ch,), "ones"), (f"{name}.norm_bias", (out_ch,), "zeros")]
    return layout


def _conv_transpose(name: str, in_ch: int, out_ch: int, k: int, norm: bool) -> Layout:
    # kernel (in, out, K, K); bias and norm follow the output channels
    layout: Layout = [(f"{name}.weight", (in_ch, out_ch, k, k), "he_transposed"), (f"{name}.bias", (out_ch,), "zeros")]
    if norm:
        layout += [(f"{name}.norm_gain", (out_ch,), "ones"), (f"{name}.norm_bias", (out_ch,), "zeros")]
    return layout


def _generator_layout(spec: GeneratorSpec) -> Layout:
    w0, w1, w2 = spec.widths
    c = spec.image_channels
    layout = _conv("stem", w0, c + spec.num_domains, 7, True)
    layout += _conv("down1", w1, w0, 3, True)
    layout += _conv("down2", w2, w1, 3, True)
    for block in ("res1", "res2"):
        layout += _conv(f"{block}.conv_a", w2, w2, 3, True)
        layout += _conv(f"{block}.conv_b", w2, w2, 3, True)
    layout += _conv_transpose("up1", w2, w1, 3, True)
    layout += _conv_transpose("up2", w1, w0, 3, True)
    layout += [("out.weight", (c, w0, 7, 7), "zeros"), ("out.bias", (c,), "zeros")]
    return layout


def _classifier_layout(spec: ClassifierSpec) -> Layout:
    layout: Layout = []
    in_ch = spec.image_channels
    for stage in range(4):
        layout += _conv(f"conv{stage}", spec.width, in_ch, 3, False)
        in_ch = spec.width
    layout += [("head.weight", (spec.num_classes, spec.feature_dim), "he"), ("head.bias", (spec.num_classes,), "zeros")]
    return layout


def _critic_layout(spec: CriticSpec) -> Layout:
    layout: Layout = []
    in_ch = spec.image_channels
    for stage, width in enumerate(spec.widths):
        layout += _conv(f"conv{stage}", width, in_ch, 3, False)
        in_ch = width
    layout += [
        ("embed.weight", (spec.embedding_dim, in_ch), "he"),
        ("embed.bias", (spec.embedding_dim,), "zeros"),
        ("head.weight", (spec.num_domains, spec.embedding_dim), "he"),
        ("head.bias", (spec.num_domains,), "zeros"),
    ]
    return layout


def _fan_in(shape: Tuple[int, ...], transposed: bool) -> int:
    if len(shape) == 4:
        channels = shape[0] if transposed else shape[1]
        return channels * shape[2] * shape[3]
    return shape[1]


def init_weights(spec: ArchSpec, seed: int) -> WeightSet:
    # He-uniform fan-in for conv/linear, zero biases, zero generator output conv
    rng = np.random.default_rng(seed)
    if isinstance(spec, GeneratorSpec):
        layout, cls = _generator_layout(spec), GeneratorWeights
    elif isinstance(spec, ClassifierSpec):
        layout, cls = _classifier_layout(spec), TaskClassifierWeights
    elif isinstance(spec, CriticSpec):
        layout, cls = _critic_layout(spec), CriticWeights
    else:
        raise TypeError(f"Unknown architecture spec: {type(spec).__name__}")

    arrays: Dict[str, np.ndarray] = {}
    for name, shape, kind in layout:
        if kind in ("he", "he_transposed"):
            bound = math.sqrt(6.0 / _fan_in(shape, transposed=kind == "he_transposed"))
            arrays[name] = rng.uniform(-bound, bound, size=shape)
        elif kind == "ones":
            arrays[name] = np.ones(shape)
        else:
            arrays[name] = np.zeros(shape)
    return cls(spec=spec, arrays=arrays)


def write_container(path: str | Path, tensors: Dict[str, np.ndarray]) -> None:
    out = bytearray(MAGIC)
    out += struct.pack("<II", VERSION, len(tensors))
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        values = np.ascontiguousarray(array, dtype="<f8")
        out += struct.pack("<I", len(encoded)) + encoded
        out += struct.pack("<I", values.ndim)
        out += struct.pack(f"<{values.ndim}Q", *values.shape)
        out += values.tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as f:
        f.write(bytes(out))


def read_container(path: str | Path) -> Dict[str, np.ndarray]:
    with open(path, "rb") as f:
        raw = f.read()
    where = str(path)
    if raw[:4] != MAGIC:
        raise WeightsFormatError(where, "bad magic")
    if len(raw) < 16:
        raise WeightsFormatError(where, "truncated header")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise WeightsVersionError(where, version)
    stored = struct.unpack_from("<I", raw, len(raw) - 4)[0]
    computed = zlib.crc32(raw[:-4]) & 0xFFFFFFFF
    if stored != computed:
        raise WeightsChecksumError(where, stored, computed)

    body = raw[:-4]
    offset = 12
    tensors: Dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", body, offset)
            offset += 4
            name = body[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<I", body, offset)
            offset += 4
            dims = struct.unpack_from(f"<{rank}Q", body, offset)
            offset += 8 * rank
            size = int(np.prod(dims)) if rank else 1
            payload = np.frombuffer(body, dtype="<f8", count=size, offset=offset)
            offset += 8 * size
            tensors[name] = payload.astype(np.float64).reshape(dims)
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise WeightsFormatError(where, f"corrupt tensor table: {e}")
    if offset != len(body):
        raise WeightsFormatError(where, f"{len(body) - offset} trailing bytes")
    return tensors


def save_weights(weights: WeightSet, path: str | Path) -> None:
    write_container(path, {f"{weights.kind}/{name}": value for name, value in weights.arrays.items()})
    logger.debug(f"Saved {weights.kind} weights ({weights.num_parameters()} values) to {path}")


def _spec_from_arrays(kind: str, arrays: Dict[str, np.ndarray]) -> ArchSpec:
    # Recover the architecture from parameter shapes
    if kind == "generator":
        c = arrays["out.weight"].shape[0]
        widths = [arrays["stem.weight"].shape[0], arrays["down1.weight"].shape[0], arrays["down2.weight"].shape[0]]
        return GeneratorSpec(
            image_channels=c, num_domains=arrays["stem.weight"].shape[1] - c, widths=widths
        )
    if kind == "classifier":
        width = arrays["conv0.weight"].shape[0]
        side = int(round(math.sqrt(arrays["head.weight"].shape[1] / width)))
        return ClassifierSpec(
            image_channels=arrays["conv0.weight"].shape[1],
            image_size=side * 16,
            width=width,
            num_classes=arrays["head.weight"].shape[0],
        )
    if kind == "critic":
        return CriticSpec(
            image_channels=arrays["conv0.weight"].shape[1],
            widths=[arrays[f"conv{i}.weight"].shape[0] for i in range(3)],
            embedding_dim=arrays["embed.weight"].shape[0],
            num_domains=arrays["head.weight"].shape[0],
        )
    raise KeyError(kind)


_KINDS = {"generator": GeneratorWeights, "classifier": TaskClassifierWeights, "critic": CriticWeights}


def load_weights(path: str | Path) -> WeightSet:
    tensors = read_container(path)
    kinds = {name.split("/", 1)[0] for name in tensors}
    if len(kinds) != 1 or next(iter(kinds)) not in _KINDS:
        raise WeightsFormatError(str(path), f"expected one network kind, found {sorted(kinds)}")
    kind = kinds.pop()
    arrays = {name.split("/", 1)[1]: value for name, value in tensors.items()}
    try:
        spec = _spec_from_arrays(kind, arrays)
    except KeyError as e:
        raise WeightsFormatError(str(path), f"missing tensor {e}")
    return _KINDS[kind](spec=spec, arrays=arrays)
