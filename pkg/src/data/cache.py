"""
src/data/cache.py

Dataset cache in the L2AW container (tensors "images" and "labels") with a JSON provenance sidecar
at <path>.provenance.json holding the domain index, name, provenance and content digest.

Top-level declarations:
- save_dataset: Write container and sidecar
- load_dataset: Read both back, verifying the digest
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from src.nets import read_container, write_container

from .types import DatasetCacheError, DomainDataset

logger = logging.getLogger(__name__)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".provenance.json")


def save_dataset(ds: DomainDataset, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    write_container(p, {"images": ds.images, "labels": ds.labels.astype(np.float64)})
    meta = {"index": ds.index, "name": ds.name, "digest": ds.digest(), "provenance": ds.provenance}
    _sidecar(p).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Cached dataset '{ds.name}' ({len(ds)} samples) at {p}")
    return p


def load_dataset(path: str | Path) -> DomainDataset:
    p = Path(path)
    side = _sidecar(p)
    if not side.exists():
        raise DatasetCacheError(f"Missing provenance sidecar {side}")
    meta = json.loads(side.read_text(encoding="utf-8"))
    arrays = read_container(p)
    if set(arrays) != {"images", "labels"}:
        raise DatasetCacheError(f"{p} holds tensors {sorted(arrays)}, expected images and labels")
    ds = DomainDataset(
        index=int(meta["index"]),
        name=str(meta["name"]),
        images=arrays["images"],
        labels=arrays["labels"].astype(np.int64),
        provenance=meta.get("provenance", {}),
    )
    if ds.digest() != meta.get("digest"):
        raise DatasetCacheError(f"{p} does not match the digest recorded in {side}")
    return ds
