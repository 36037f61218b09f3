"""Minimal readers for the corpus formats the generation engine consumes.

The exporter deliberately re-reads the raw dataset files itself instead of
importing the engine: the only contract between the two tools is the PEM1
file plus the corpus checksum recorded in the sidecar manifest.  Row i of the
exported table must therefore correspond to record i of these files, which
read IDX pairs and CIFAR-10 batches in plain record order.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

MNIST_IMAGE_MAGIC = 0x00000803
MNIST_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073

MNIST_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
CIFAR_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))


class DatasetError(ValueError):
    """Raised when a dataset file is missing or malformed."""


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise DatasetError(f"truncated file while reading {what}")
    return data


def load_idx_pair(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Read an IDX image/label pair; images come back as N x H x W x 1 uint8."""
    with open(images_path, "rb") as f:
        magic, count, rows, cols = struct.unpack(
            ">IIII", _read_exact(f, 16, "image header"))
        if magic != MNIST_IMAGE_MAGIC:
            raise DatasetError(f"bad image magic 0x{magic:08x}")
        pixels = _read_exact(f, count * rows * cols, "image data")
    with open(labels_path, "rb") as f:
        magic, label_count = struct.unpack(
            ">II", _read_exact(f, 8, "label header"))
        if magic != MNIST_LABEL_MAGIC:
            raise DatasetError(f"bad label magic 0x{magic:08x}")
        label_bytes = _read_exact(f, label_count, "label data")
    if count != label_count:
        raise DatasetError(f"image count {count} != label count {label_count}")
    images = np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows, cols, 1)
    labels = np.frombuffer(label_bytes, dtype=np.uint8).astype(np.int64)
    return images.copy(), labels


def load_cifar_batches(paths) -> tuple[np.ndarray, np.ndarray]:
    """Read CIFAR-10 binary batches; images come back as N x 32 x 32 x 3 uint8."""
    images, labels = [], []
    for path in paths:
        data = Path(path).read_bytes()
        if len(data) == 0 or len(data) % CIFAR_RECORD_BYTES != 0:
            raise DatasetError(f"{path}: bad file length {len(data)}")
        records = np.frombuffer(data, dtype=np.uint8).reshape(
            -1, CIFAR_RECORD_BYTES)
        if records[:, 0].max(initial=0) >= 10:
            raise DatasetError(f"{path}: label byte >= 10")
        planes = records[:, 1:].reshape(-1, 3, 32, 32)
        images.append(np.transpose(planes, (0, 2, 3, 1)))
        labels.append(records[:, 0].astype(np.int64))
    if not images:
        raise DatasetError("no batch files given")
    return np.ascontiguousarray(np.concatenate(images)), np.concatenate(labels)


def load_dataset(dataset: str, data_dir) -> tuple[np.ndarray, np.ndarray]:
    root = Path(data_dir)
    if dataset == "mnist":
        images, labels = root / MNIST_FILES[0], root / MNIST_FILES[1]
        if not images.exists() or not labels.exists():
            raise DatasetError(f"MNIST files not found under {root}")
        return load_idx_pair(images, labels)
    if dataset == "cifar10":
        paths = [root / name for name in CIFAR_FILES if (root / name).exists()]
        if not paths:
            raise DatasetError(f"no CIFAR-10 batches under {root}")
        return load_cifar_batches(paths)
    raise ValueError(f"unknown dataset {dataset!r}")


def corpus_checksum(images: np.ndarray, labels: np.ndarray) -> str:
    """SHA-256 over pixel bytes then int64 label bytes.

    This is the same recipe the generation engine uses for its manifests, so
    the two sides can confirm they are talking about the same corpus.
    """
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(images).tobytes())
    h.update(np.ascontiguousarray(labels.astype(np.int64)).tobytes())
    return h.hexdigest()
