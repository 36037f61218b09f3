"""Batch export: run a frozen encoder over a corpus and write a PEM1 table.

PEM1 layout (little-endian): magic bytes ``PEM1``, u32 row count N, u32
dimension D, then N*D float32 values row-major; row i belongs to dataset
record i.  A JSON sidecar manifest records the encoder identity, the
preprocessing recipe, and the corpus checksum so the consumer can confirm
the table matches its corpus.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import corpus_checksum, load_dataset
from .encoders import get_encoder

PEM1_MAGIC = b"PEM1"


@dataclass(frozen=True)
class ExportConfig:
    dataset: str
    data_dir: str
    encoder: str = "random-conv"
    layer_tap: str = "penultimate"
    out_path: str = "embeddings.pem1"
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.layer_tap not in ("penultimate", "head"):
            raise ValueError(f"unknown layer tap {self.layer_tap!r}")


def write_pem1(vectors: np.ndarray, path) -> None:
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise ValueError("vectors must be N x D")
    if not np.isfinite(vectors).all():
        raise ValueError("vectors must be finite")
    n, d = vectors.shape
    with open(path, "wb") as f:
        f.write(PEM1_MAGIC)
        f.write(struct.pack("<II", n, d))
        f.write(vectors.tobytes())


def export_embeddings(cfg: ExportConfig) -> dict:
    """Run the export; returns the manifest that was written alongside."""
    images, labels = load_dataset(cfg.dataset, cfg.data_dir)
    encoder = get_encoder(cfg.encoder, seed=cfg.seed, layer_tap=cfg.layer_tap)

    chunks = []
    for start in range(0, images.shape[0], cfg.batch_size):
        chunks.append(encoder.encode(images[start:start + cfg.batch_size]))
    vectors = np.concatenate(chunks, axis=0)
    if not np.isfinite(vectors).all():
        raise RuntimeError("encoder produced non-finite values")

    write_pem1(vectors, cfg.out_path)
    manifest = {
        "tool": "embed-export",
        "format": "PEM1",
        "dataset": cfg.dataset,
        "count": int(vectors.shape[0]),
        "dim": int(vectors.shape[1]),
        "encoder": encoder.name,
        "layer_tap": encoder.layer_tap,
        "preprocessing": encoder.preprocessing,
        "seed": cfg.seed,
        "corpus_checksum": corpus_checksum(images, labels),
    }
    manifest_path = Path(str(cfg.out_path) + ".manifest.json")
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest
