import struct
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def write_idx_pair(images: np.ndarray, labels: np.ndarray, directory) -> None:
    """Write an IDX image/label file pair (N x H x W x 1 uint8 images)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n, h, w, _ = images.shape
    with open(directory / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(np.ascontiguousarray(images).tobytes())
    with open(directory / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.astype(np.uint8).tobytes())


def make_digit_images(n: int, rng_seed: int = 0):
    """n jittered 28x28x1 digit images from sklearn's bundled digits."""
    from PIL import Image
    from sklearn.datasets import load_digits

    data = load_digits()
    base = (data.images * (255.0 / 16.0)).astype(np.uint8)
    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(len(base))
    images = np.zeros((n, 28, 28, 1), dtype=np.uint8)
    labels = np.zeros(n, dtype=np.int64)
    for i in range(n):
        j = order[i % len(order)]
        img = Image.fromarray(base[j], mode="L").resize((20, 20),
                                                        Image.BILINEAR)
        canvas = Image.new("L", (28, 28), 0)
        dy, dx = (int(rng.integers(-3, 4)) for _ in range(2))
        canvas.paste(img, (4 + dx, 4 + dy))
        images[i, :, :, 0] = np.asarray(canvas)
        labels[i] = data.target[j]
    return images, labels


@pytest.fixture(scope="session")
def digit_data():
    return make_digit_images(100, rng_seed=5)


@pytest.fixture(scope="session")
def digit_dir(tmp_path_factory, digit_data):
    directory = tmp_path_factory.mktemp("mnist")
    write_idx_pair(*digit_data, directory)
    return directory
