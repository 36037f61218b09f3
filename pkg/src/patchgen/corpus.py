"""Dataset loading and indexing.

Supports the two binary formats the engine consumes as source corpora:
MNIST-style IDX files and CIFAR-10 batch files.  The loaded corpus is an
immutable, fully in-memory array of 8-bit images plus integer labels.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

MNIST_IMAGE_MAGIC = 0x00000803
MNIST_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 32*32*3 pixel bytes


class CorpusFormatError(ValueError):
    """Raised when a dataset file violates its binary format."""


@dataclass(frozen=True)
class ImageRef:
    """Identity of one source image: corpus index plus class label."""

    index: int
    label: int


@dataclass(frozen=True)
class ImageCorpus:
    """Immutable labeled image collection, N x H x W x Ch, uint8."""

    images: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError("images must be N x H x W x Ch")
        if self.images.dtype != np.uint8:
            raise ValueError("images must be uint8")
        if self.images.shape[0] < 1:
            raise ValueError("corpus must contain at least one image")
        if self.labels.shape != (self.images.shape[0],):
            raise ValueError("labels length must equal image count")
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.class_count):
            raise ValueError("labels must lie in [0, class_count)")
        self.images.flags.writeable = False
        self.labels.flags.writeable = False

    @property
    def count(self) -> int:
        return self.images.shape[0]

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def width(self) -> int:
        return self.images.shape[2]

    @property
    def channels(self) -> int:
        return self.images.shape[3]

    def ref(self, index: int) -> ImageRef:
        return ImageRef(index=int(index), label=int(self.labels[index]))

    def checksum(self) -> str:
        """SHA-256 over pixel and label bytes; identifies the corpus in manifests."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.images).tobytes())
        h.update(np.ascontiguousarray(self.labels.astype(np.int64)).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class CorpusSelection:
    """Strictly increasing corpus indices admitted as retrieval sources."""

    indices: np.ndarray = field()

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("selection must be a non-empty 1-D index list")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("selection indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        idx.flags.writeable = False

    def __len__(self) -> int:
        return int(self.indices.size)


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CorpusFormatError(f"truncated file while reading {what}")
    return data


def load_mnist(images_path, labels_path) -> ImageCorpus:
    """Load an IDX image/label file pair into a 28x28x1 corpus."""
    with open(images_path, "rb") as f:
        magic, count, rows, cols = struct.unpack(">IIII",
                                                 _read_exact(f, 16, "image header"))
        if magic != MNIST_IMAGE_MAGIC:
            raise CorpusFormatError(
                f"bad image magic 0x{magic:08x}, expected 0x{MNIST_IMAGE_MAGIC:08x}")
        pixels = _read_exact(f, count * rows * cols, "image data")
    with open(labels_path, "rb") as f:
        magic, label_count = struct.unpack(">II", _read_exact(f, 8, "label header"))
        if magic != MNIST_LABEL_MAGIC:
            raise CorpusFormatError(
                f"bad label magic 0x{magic:08x}, expected 0x{MNIST_LABEL_MAGIC:08x}")
        label_bytes = _read_exact(f, label_count, "label data")
    if count != label_count:
        raise CorpusFormatError(
            f"image count {count} does not match label count {label_count}")
    images = np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows, cols, 1)
    labels = np.frombuffer(label_bytes, dtype=np.uint8).astype(np.int64)
    return ImageCorpus(images=images.copy(), labels=labels, class_count=10)


def save_mnist(corpus: ImageCorpus, images_path, labels_path) -> None:
    """Write a corpus back to the IDX pair format (round-trip inverse of load_mnist)."""
    n, h, w, ch = corpus.images.shape
    if ch != 1:
        raise ValueError("IDX export requires single-channel images")
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", MNIST_IMAGE_MAGIC, n, h, w))
        f.write(np.ascontiguousarray(corpus.images).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", MNIST_LABEL_MAGIC, n))
        f.write(corpus.labels.astype(np.uint8).tobytes())


def load_cifar10(batch_paths) -> ImageCorpus:
    """Load CIFAR-10 binary batches into a 32x32x3, channel-interleaved corpus."""
    images = []
    labels = []
    for path in batch_paths:
        with open(path, "rb") as f:
            data = f.read()
        if len(data) == 0 or len(data) % CIFAR_RECORD_BYTES != 0:
            raise CorpusFormatError(
                f"{path}: length {len(data)} is not a positive multiple "
                f"of {CIFAR_RECORD_BYTES}")
        records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        batch_labels = records[:, 0]
        if batch_labels.max(initial=0) >= 10:
            raise CorpusFormatError(f"{path}: label byte >= 10")
        planes = records[:, 1:].reshape(-1, 3, 32, 32)
        images.append(np.transpose(planes, (0, 2, 3, 1)))
        labels.append(batch_labels.astype(np.int64))
    if not images:
        raise CorpusFormatError("no batch files given")
    return ImageCorpus(images=np.ascontiguousarray(np.concatenate(images)),
                       labels=np.concatenate(labels),
                       class_count=10)


def save_cifar10(corpus: ImageCorpus, path) -> None:
    """Write a corpus as one CIFAR-10 binary batch (round-trip inverse of load_cifar10)."""
    n, h, w, ch = corpus.images.shape
    if (h, w, ch) != (32, 32, 3):
        raise ValueError("CIFAR export requires 32x32x3 images")
    planes = np.transpose(corpus.images, (0, 3, 1, 2)).reshape(n, -1)
    records = np.concatenate(
        [corpus.labels.astype(np.uint8)[:, None], planes], axis=1)
    with open(path, "wb") as f:
        f.write(np.ascontiguousarray(records).tobytes())


def select(corpus: ImageCorpus, class_filter: int | None = None,
           max_images: int | None = None, rng_seed: int = 0) -> CorpusSelection:
    """Pick source images: optional class filter, optional seeded size cap.

    Pure function of its arguments; the subsample under ``max_images`` is a
    seeded uniform draw without replacement, returned in increasing order.
    """
    if class_filter is not None:
        if not 0 <= class_filter < corpus.class_count:
            raise ValueError(f"class_filter {class_filter} out of range")
        indices = np.flatnonzero(corpus.labels == class_filter)
    else:
        indices = np.arange(corpus.count)
    if indices.size == 0:
        raise ValueError(f"no images with class {class_filter}")
    if max_images is not None and indices.size > max_images:
        rng = np.random.default_rng(rng_seed)
        indices = np.sort(rng.choice(indices, size=max_images, replace=False))
    return CorpusSelection(indices=indices.astype(np.int64))
