"""Per-pixel provenance: trace logs, source maps, and their rendered images.

Trace files are CSV on purpose: a generated image has at most a few thousand
pixels and inspecting where each one came from is the whole point of a
white-box generator.
"""

from __future__ import annotations

import colorsys
import csv
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .corpus import ImageCorpus, ImageRef

TRACE_HEADER = ["step", "ty", "tx", "src_image", "sy", "sx", "class", "pool_size"]

# Fixed class palette (10 classes), so maps are comparable across runs.
CLASS_PALETTE = (
    (31, 119, 180),   # 0
    (255, 127, 14),   # 1
    (44, 160, 44),    # 2
    (214, 39, 40),    # 3
    (148, 103, 189),  # 4
    (140, 86, 75),    # 5
    (227, 119, 194),  # 6
    (127, 127, 127),  # 7
    (188, 189, 34),   # 8
    (23, 190, 207),   # 9
)

_GOLDEN = 0.6180339887498949


@dataclass(frozen=True)
class TraceRecord:
    step: int
    target: tuple[int, int]
    source_image: ImageRef
    source_center: tuple[int, int]
    class_label: int
    pool_size: int


@dataclass(frozen=True)
class TraceLog:
    """One record per canvas pixel (seed pixels at step 0)."""

    records: tuple
    height: int
    width: int

    def __len__(self) -> int:
        return len(self.records)

    def is_complete(self) -> bool:
        targets = {r.target for r in self.records}
        return (len(self.records) == self.height * self.width
                and len(targets) == len(self.records))


@dataclass(frozen=True)
class SourceMaps:
    id_map: np.ndarray     # (H, W) int64 source image indices
    class_map: np.ndarray  # (H, W) int64 class labels


def write_trace(log: TraceLog, path) -> None:
    """Write the log as CSV, ordered by step (seed rows in raster order)."""
    records = sorted(log.records, key=lambda r: (r.step, r.target))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_HEADER)
        for r in records:
            writer.writerow([r.step, r.target[0], r.target[1],
                             r.source_image.index, r.source_center[0],
                             r.source_center[1], r.class_label, r.pool_size])


def read_trace(path) -> TraceLog:
    """Inverse of write_trace; canvas dims inferred from the target coordinates."""
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        for row in reader:
            step, ty, tx, src, sy, sx, cls, pool = (int(v) for v in row)
            records.append(TraceRecord(
                step=step, target=(ty, tx),
                source_image=ImageRef(index=src, label=cls),
                source_center=(sy, sx), class_label=cls, pool_size=pool))
    height = max(r.target[0] for r in records) + 1
    width = max(r.target[1] for r in records) + 1
    return TraceLog(records=tuple(records), height=height, width=width)


def build_maps(log: TraceLog) -> SourceMaps:
    """Project the log onto per-pixel source-image and source-class maps."""
    if not log.is_complete():
        raise ValueError("trace log must cover every pixel exactly once")
    id_map = np.empty((log.height, log.width), dtype=np.int64)
    class_map = np.empty((log.height, log.width), dtype=np.int64)
    for r in log.records:
        id_map[r.target] = r.source_image.index
        class_map[r.target] = r.class_label
    return SourceMaps(id_map=id_map, class_map=class_map)


def class_color(label: int) -> tuple[int, int, int]:
    return CLASS_PALETTE[label % len(CLASS_PALETTE)]


def id_color(index: int) -> tuple[int, int, int]:
    """Deterministic hue from the image index (golden-ratio hue stepping)."""
    hue = (index * _GOLDEN) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.95)
    return (int(round(r * 255)), int(round(g * 255)), int(round(b * 255)))


def _colorize(map2d: np.ndarray, lookup) -> np.ndarray:
    out = np.empty(map2d.shape + (3,), dtype=np.uint8)
    for value in np.unique(map2d):
        out[map2d == value] = lookup(int(value))
    return out


def render_maps(maps: SourceMaps, id_path=None, class_path=None,
                generated: np.ndarray | None = None, composite_path=None,
                scale: int = 8) -> None:
    """Render ID/class maps (and optionally a side-by-side composite) as PNGs."""
    id_rgb = _colorize(maps.id_map, id_color)
    class_rgb = _colorize(maps.class_map, class_color)
    if id_path is not None:
        _save_scaled(id_rgb, id_path, scale)
    if class_path is not None:
        _save_scaled(class_rgb, class_path, scale)
    if composite_path is not None:
        if generated is None:
            raise ValueError("composite rendering needs the generated image")
        gen_rgb = generated if generated.shape[-1] == 3 \
            else np.repeat(generated, 3, axis=-1)
        gap = np.full((maps.id_map.shape[0], 1, 3), 255, dtype=np.uint8)
        strip = np.concatenate([gen_rgb, gap, class_rgb, gap, id_rgb], axis=1)
        _save_scaled(strip, composite_path, scale)


def _save_scaled(rgb: np.ndarray, path, scale: int) -> None:
    img = Image.fromarray(rgb, mode="RGB")
    if scale > 1:
        img = img.resize((rgb.shape[1] * scale, rgb.shape[0] * scale),
                         Image.NEAREST)
    img.save(path, format="PNG")


def verify_provenance(log: TraceLog, generated: np.ndarray,
                      corpus: ImageCorpus) -> bool:
    """Check that every pixel equals its recorded source pixel in the corpus."""
    for r in log.records:
        src = corpus.images[r.source_image.index, r.source_center[0],
                            r.source_center[1]]
        if not np.array_equal(src, generated[r.target]):
            return False
    return True
