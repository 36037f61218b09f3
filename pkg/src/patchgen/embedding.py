"""Per-image embedding tables and the per-generation conditioning vector.

Embeddings come either from the PEM1 binary file format (produced offline by
an encoder export tool) or from the built-in grid mean-pool fallback, which
keeps the engine fully self-contained.  Distances are plain Euclidean.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .corpus import ImageCorpus, ImageRef

PEM1_MAGIC = b"PEM1"

ORIGIN_SEED = "seed-image"
ORIGIN_USER = "user-supplied"
ORIGIN_NONE = "none"


class EmbeddingFormatError(ValueError):
    """Raised when a PEM1 file is malformed or inconsistent with the corpus."""


@dataclass(frozen=True)
class EmbeddingTable:
    """N x D float32 vectors, row i belonging to corpus image i."""

    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise ValueError("vectors must be N x D with D >= 1")
        if self.vectors.dtype != np.float32:
            object.__setattr__(self, "vectors",
                               self.vectors.astype(np.float32))
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding vectors must be finite")
        self.vectors.flags.writeable = False

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class ConditioningVector:
    """The fixed vector z a generation is conditioned on, plus where it came from."""

    z: np.ndarray
    origin: str

    def __post_init__(self):
        if self.origin not in (ORIGIN_SEED, ORIGIN_USER, ORIGIN_NONE):
            raise ValueError(f"unknown origin {self.origin!r}")
        z = np.asarray(self.z, dtype=np.float32)
        if self.origin != ORIGIN_NONE and not np.all(np.isfinite(z)):
            raise ValueError("conditioning vector must be finite")
        object.__setattr__(self, "z", z)
        z.flags.writeable = False


def load_embeddings(path, corpus: ImageCorpus) -> EmbeddingTable:
    """Read a PEM1 file and validate it against the corpus."""
    with open(path, "rb") as f:
        header = f.read(12)
        if len(header) != 12 or header[:4] != PEM1_MAGIC:
            raise EmbeddingFormatError(f"{path}: not a PEM1 file")
        count, dim = struct.unpack("<II", header[4:])
        data = f.read()
    expected = count * dim * 4
    if len(data) != expected:
        raise EmbeddingFormatError(
            f"{path}: expected {expected} payload bytes, got {len(data)}")
    if count != corpus.count:
        raise EmbeddingFormatError(
            f"{path}: {count} rows but corpus has {corpus.count} images")
    vectors = np.frombuffer(data, dtype="<f4").reshape(count, dim)
    if not np.all(np.isfinite(vectors)):
        raise EmbeddingFormatError(f"{path}: non-finite embedding values")
    return EmbeddingTable(vectors=vectors.copy())


def save_embeddings(table: EmbeddingTable, path) -> None:
    """Write a table in PEM1 format (little-endian magic/count/dim + float32 rows)."""
    with open(path, "wb") as f:
        f.write(PEM1_MAGIC)
        f.write(struct.pack("<II", table.count, table.dim))
        f.write(np.ascontiguousarray(table.vectors.astype("<f4")).tobytes())


def builtin_embedding(corpus: ImageCorpus, grid: int = 4) -> EmbeddingTable:
    """Grid mean-pool fallback encoder: per-cell mean intensity, scaled to [0, 1].

    Each image becomes a grid*grid*Ch vector (cells in raster order, channels
    innermost).  Cell boundaries are i*H//grid, so uneven sizes are handled.
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    n, h, w, ch = corpus.images.shape
    row_edges = [i * h // grid for i in range(grid + 1)]
    col_edges = [i * w // grid for i in range(grid + 1)]
    out = np.empty((n, grid * grid * ch), dtype=np.float32)
    images = corpus.images.astype(np.float64)
    for gy in range(grid):
        for gx in range(grid):
            cell = images[:, row_edges[gy]:row_edges[gy + 1],
                          col_edges[gx]:col_edges[gx + 1], :]
            means = cell.mean(axis=(1, 2)) / 255.0
            out[:, (gy * grid + gx) * ch:(gy * grid + gx + 1) * ch] = means
    return EmbeddingTable(vectors=out)


def embedding_distance(z: ConditioningVector, table: EmbeddingTable,
                       image: ImageRef) -> float:
    """Euclidean distance between z and the table row of ``image``."""
    if z.origin == ORIGIN_NONE:
        return 0.0
    if z.z.shape[0] != table.dim:
        raise ValueError(f"dim mismatch: z has {z.z.shape[0]}, table has {table.dim}")
    diff = z.z.astype(np.float64) - table.vectors[image.index].astype(np.float64)
    return float(np.sqrt(np.dot(diff, diff)))


def make_conditioning(seed_image: ImageRef, table: EmbeddingTable) -> ConditioningVector:
    """Freeze z at the seed image's embedding for the whole generation."""
    return ConditioningVector(z=table.vectors[seed_image.index].copy(),
                              origin=ORIGIN_SEED)


def user_conditioning(z) -> ConditioningVector:
    return ConditioningVector(z=np.asarray(z, dtype=np.float32), origin=ORIGIN_USER)


def no_conditioning() -> ConditioningVector:
    """Ablation stand-in: embedding distances are treated as 0 everywhere."""
    return ConditioningVector(z=np.zeros(0, dtype=np.float32), origin=ORIGIN_NONE)
