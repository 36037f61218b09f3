"""Frozen feature encoders.

Three interchangeable choices, all deterministic at inference time:

* ``random-conv`` — a small convolutional network with seeded random weights,
  frozen in eval mode.  Random convolutional features are a standard
  training-free baseline and need no checkpoint file.
* ``hog`` — histogram-of-oriented-gradients features (no neural network).
* ``checkpoint:<path>`` — a user-supplied TorchScript module; its output
  (or the tensor before a trailing projection, see ``layer_tap``) is used
  as the embedding.

Every encoder consumes uint8 images of any size/channel count; preprocessing
is part of the encoder and described by its ``preprocessing`` string so it
can be recorded in the export manifest.
"""

from __future__ import annotations

import numpy as np
import torch
from PIL import Image
from skimage.feature import hog
from torch import nn

INPUT_SIZE = 32


class EncoderError(RuntimeError):
    """Raised when an encoder cannot be constructed."""


def _to_input_batch(images: np.ndarray) -> torch.Tensor:
    """uint8 N x H x W x Ch -> float N x 3 x 32 x 32 standardized to mean 0."""
    out = np.empty((images.shape[0], INPUT_SIZE, INPUT_SIZE, 3),
                   dtype=np.float32)
    for i, img in enumerate(images):
        if img.shape[-1] == 1:
            pil = Image.fromarray(img[:, :, 0], mode="L").convert("RGB")
        else:
            pil = Image.fromarray(img, mode="RGB")
        pil = pil.resize((INPUT_SIZE, INPUT_SIZE), Image.BILINEAR)
        out[i] = np.asarray(pil, dtype=np.float32) / 255.0
    tensor = torch.from_numpy(out).permute(0, 3, 1, 2)
    return (tensor - 0.5) / 0.5


def _to_grayscale(images: np.ndarray) -> np.ndarray:
    """uint8 N x H x W x Ch -> float N x 32 x 32 in [0, 1]."""
    out = np.empty((images.shape[0], INPUT_SIZE, INPUT_SIZE), dtype=np.float32)
    for i, img in enumerate(images):
        if img.shape[-1] == 1:
            pil = Image.fromarray(img[:, :, 0], mode="L")
        else:
            pil = Image.fromarray(img, mode="RGB").convert("L")
        pil = pil.resize((INPUT_SIZE, INPUT_SIZE), Image.BILINEAR)
        out[i] = np.asarray(pil, dtype=np.float32) / 255.0
    return out


class _ConvBackbone(nn.Module):
    """Four conv blocks, global average pooling, then a projection head."""

    def __init__(self, feature_dim: int = 128, head_dim: int = 64):
        super().__init__()
        widths = (32, 64, 128, feature_dim)
        layers = []
        in_ch = 3
        for j, out_ch in enumerate(widths):
            layers += [nn.Conv2d(in_ch, out_ch, 3,
                                 stride=1 if j == 0 else 2, padding=1),
                       nn.ReLU()]
            in_ch = out_ch
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(feature_dim, head_dim)

    def forward(self, x: torch.Tensor, layer_tap: str = "penultimate"):
        feats = self.pool(self.features(x)).flatten(1)
        if layer_tap == "penultimate":
            return feats
        if layer_tap == "head":
            return self.head(feats)
        raise ValueError(f"unknown layer tap {layer_tap!r}")


class RandomConvEncoder:
    """Seeded random convolutional network, frozen in eval mode."""

    def __init__(self, seed: int = 0, layer_tap: str = "penultimate"):
        torch.manual_seed(seed)
        self.net = _ConvBackbone()
        self.net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)
        self.layer_tap = layer_tap
        self.name = f"random-conv(seed={seed})"
        self.preprocessing = ("RGB-replicate, bilinear resize to 32x32, "
                              "scale to [0,1], standardize (0.5, 0.5)")

    @torch.no_grad()
    def encode(self, images: np.ndarray) -> np.ndarray:
        batch = _to_input_batch(images)
        return self.net(batch, self.layer_tap).numpy().astype(np.float32)


class HogEncoder:
    """Histogram-of-oriented-gradients features on 32x32 grayscale."""

    def __init__(self, orientations: int = 8, cell: int = 8):
        self.orientations = orientations
        self.cell = cell
        self.name = f"hog(orientations={orientations},cell={cell})"
        self.preprocessing = ("grayscale, bilinear resize to 32x32, "
                              "scale to [0,1]")
        self.layer_tap = "penultimate"

    def encode(self, images: np.ndarray) -> np.ndarray:
        gray = _to_grayscale(images)
        rows = [hog(g, orientations=self.orientations,
                    pixels_per_cell=(self.cell, self.cell),
                    cells_per_block=(2, 2), feature_vector=True)
                for g in gray]
        return np.asarray(rows, dtype=np.float32)


class CheckpointEncoder:
    """A user-supplied frozen TorchScript module applied to standardized input."""

    def __init__(self, path: str, layer_tap: str = "penultimate"):
        try:
            self.net = torch.jit.load(path, map_location="cpu")
        except Exception as exc:
            raise EncoderError(f"cannot load checkpoint {path}: {exc}") from exc
        self.net.eval()
        self.layer_tap = layer_tap
        self.name = f"checkpoint:{path}"
        self.preprocessing = ("RGB-replicate, bilinear resize to 32x32, "
                              "scale to [0,1], standardize (0.5, 0.5)")

    @torch.no_grad()
    def encode(self, images: np.ndarray) -> np.ndarray:
        out = self.net(_to_input_batch(images))
        return out.numpy().astype(np.float32)


def get_encoder(name: str, seed: int = 0, layer_tap: str = "penultimate"):
    if name == "random-conv":
        return RandomConvEncoder(seed=seed, layer_tap=layer_tap)
    if name == "hog":
        return HogEncoder()
    if name.startswith("checkpoint:"):
        return CheckpointEncoder(name.split(":", 1)[1], layer_tap=layer_tap)
    raise ValueError(f"unknown encoder {name!r}")
