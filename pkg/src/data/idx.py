"""
src/data/idx.py

MNIST-format IDX ingestion and writing.

Image files: big-endian u32 magic 2051, u32 count, u32 rows, u32 cols, then count*rows*cols
unsigned bytes. Label files: u32 magic 2049, u32 count, then count unsigned bytes. Pixels map to
[-1, 1] via x / 127.5 - 1 and grayscale is replicated to three channels.

Top-level declarations:
- IMAGE_MAGIC / LABEL_MAGIC: Accepted magic numbers
- parse_idx: Image file -> N x 3 x rows x cols tensor
- parse_idx_labels: Label file -> int64 labels, range-checked against num_classes
- write_idx: Write images (uint8 or [-1, 1] floats) or labels in IDX format
- load_idx_base: Paired image/label files as a base dataset, padded to the model's image size
"""

from __future__ import annotations

import hashlib
import logging
import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from src.tensor import Tensor

from .types import DomainDataset, IDXFormatError

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049


def _read_header(path: Path, raw: bytes, magic: int, fields: int) -> Tuple[int, ...]:
    header_len = 4 * (1 + fields)
    if len(raw) < header_len:
        raise IDXFormatError(str(path), "truncated header", expected=header_len, actual=len(raw))
    values = struct.unpack(f">{1 + fields}I", raw[:header_len])
    if values[0] != magic:
        raise IDXFormatError(str(path), f"bad magic {values[0]}", expected=magic, actual=values[0])
    return values[1:]


def _read_payload(path: Path, raw: bytes, header_len: int, count: int) -> np.ndarray:
    expected = header_len + count
    if len(raw) != expected:
        reason = "truncated payload" if len(raw) < expected else "trailing bytes after payload"
        raise IDXFormatError(str(path), reason, expected=expected, actual=len(raw))
    return np.frombuffer(raw, dtype=np.uint8, offset=header_len)


def _raw_images(path: str | Path) -> np.ndarray:
    p = Path(path)
    raw = p.read_bytes()
    count, rows, cols = _read_header(p, raw, IMAGE_MAGIC, 3)
    if rows == 0 or cols == 0:
        raise IDXFormatError(str(p), f"degenerate image dimensions {rows}x{cols}")
    return _read_payload(p, raw, 16, count * rows * cols).reshape(count, rows, cols)


def parse_idx(path: str | Path) -> Tensor:
    pixels = _raw_images(path).astype(np.float64) / 127.5 - 1.0
    return Tensor(np.repeat(pixels[:, None, :, :], 3, axis=1))


def parse_idx_labels(path: str | Path, num_classes: int = 10) -> np.ndarray:
    # Labels must lie in [0, num_classes)
    p = Path(path)
    raw = p.read_bytes()
    (count,) = _read_header(p, raw, LABEL_MAGIC, 1)
    labels = _read_payload(p, raw, 8, count).astype(np.int64)
    if labels.size and int(labels.max()) >= num_classes:
        raise IDXFormatError(
            str(p), f"label out of range for {num_classes} classes", expected=num_classes - 1, actual=int(labels.max())
        )
    return labels


def write_idx(path: str | Path, array: np.ndarray) -> None:
    """
    Write an IDX file; 1-D arrays become label files, 3-D/4-D arrays image files.

    uint8 arrays are written verbatim. Float images are taken as [-1, 1] values and quantized with
    round((x + 1) * 127.5); for 4-D input the first channel is written.
    """
    arr = np.asarray(array)
    if arr.ndim == 1:
        data = arr.astype(np.uint8) if arr.dtype != np.uint8 else arr
        header = struct.pack(">II", LABEL_MAGIC, arr.shape[0])
    elif arr.ndim in (3, 4):
        if arr.ndim == 4:
            arr = arr[:, 0]
        if arr.dtype == np.uint8:
            data = arr
        else:
            data = np.clip(np.rint((arr + 1.0) * 127.5), 0, 255).astype(np.uint8)
        header = struct.pack(">IIII", IMAGE_MAGIC, *arr.shape)
    else:
        raise ValueError(f"write_idx expects 1-D labels or 3-D/4-D images, got shape {arr.shape}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(header + np.ascontiguousarray(data).tobytes())


def load_idx_base(
    images_path: str | Path,
    labels_path: str | Path,
    limit: int = 0,
    image_size: int = 32,
    num_classes: int = 10,
) -> DomainDataset:
    # Pair image and label files; smaller images are zero-padded (value -1) to image_size
    images = parse_idx(images_path).data
    labels = parse_idx_labels(labels_path, num_classes)
    if images.shape[0] != labels.shape[0]:
        raise IDXFormatError(
            str(labels_path), "image/label count mismatch", expected=images.shape[0], actual=labels.shape[0]
        )
    if limit > 0:
        images, labels = images[:limit], labels[:limit]

    rows, cols = images.shape[2:]
    if rows > image_size or cols > image_size:
        raise IDXFormatError(str(images_path), f"images {rows}x{cols} exceed model image size {image_size}")
    top, left = (image_size - rows) // 2, (image_size - cols) // 2
    padded = np.full((images.shape[0], 3, image_size, image_size), -1.0)
    padded[:, :, top : top + rows, left : left + cols] = images

    digest = hashlib.sha256(Path(images_path).read_bytes() + Path(labels_path).read_bytes()).hexdigest()
    logger.info(f"Loaded {images.shape[0]} IDX images ({rows}x{cols}) from {images_path}")
    return DomainDataset(
        index=-1,
        name="idx",
        images=padded,
        labels=labels,
        provenance={"source": "idx", "images": str(images_path), "labels": str(labels_path), "sha256": digest},
    )
