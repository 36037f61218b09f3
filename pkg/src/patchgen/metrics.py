"""Generalization metrics over source maps.

Sliding-window label entropy quantifies the part-whole signature: coherent
samples have low class-map entropy (regions drawn from one class) together
with high image-ID entropy (regions assembled from many source images).
Entropies are in nats; windows that would overhang the map are skipped.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .trace import TraceLog

MAP_CLASS = "class"
MAP_IMAGE_ID = "image_id"


@dataclass(frozen=True)
class EntropyReport:
    mean_entropy: float
    window: int
    stride: int
    map_kind: str
    per_window: np.ndarray | None = None


@dataclass(frozen=True)
class SourceUsage:
    counts: dict            # source image index -> pixel count
    top_k: list             # [(index, count)], count desc, index asc on ties
    dominance: float        # max count / total


@dataclass(frozen=True)
class ModeComparison:
    means: dict             # (mode, map_kind) -> mean over reports
    checks: dict = field(default_factory=dict)


def sliding_entropy(label_map: np.ndarray, window: int = 7, stride: int = 1,
                    map_kind: str = MAP_CLASS,
                    keep_per_window: bool = False) -> EntropyReport:
    """Mean over all fully interior windows of -sum p ln p of label frequencies."""
    h, w = label_map.shape
    if window > min(h, w):
        raise ValueError("window larger than map")
    rows = range(0, h - window + 1, stride)
    cols = range(0, w - window + 1, stride)
    per = np.empty((len(rows), len(cols)))
    total = float(window * window)
    for a, r in enumerate(rows):
        for b, c in enumerate(cols):
            _, counts = np.unique(label_map[r:r + window, c:c + window],
                                  return_counts=True)
            p = counts / total
            per[a, b] = float(-(p * np.log(p)).sum())
    return EntropyReport(mean_entropy=float(per.mean()), window=window,
                         stride=stride, map_kind=map_kind,
                         per_window=per if keep_per_window else None)


def source_usage(log: TraceLog, k: int = 5) -> SourceUsage:
    """Pixel counts per source image and the single-source-dominance ratio."""
    counts = Counter(r.source_image.index for r in log.records)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    total = sum(counts.values())
    return SourceUsage(counts=dict(counts), top_k=ordered[:k],
                       dominance=max(counts.values()) / total)


def compare_modes(reports_by_mode: dict) -> ModeComparison:
    """Batch means per (mode, map kind) plus the part-whole ordering checks.

    Expected orderings: full-mode class entropy below the no-representation
    mode's, full-mode image-ID entropy above the class-conditional mode's,
    and class-conditional class entropy exactly zero.
    """
    if len(reports_by_mode) < 1 or all(not v for v in reports_by_mode.values()):
        raise ValueError("no reports given")
    means = {}
    for mode, reports in reports_by_mode.items():
        for kind in (MAP_CLASS, MAP_IMAGE_ID):
            vals = [r.mean_entropy for r in reports if r.map_kind == kind]
            if vals:
                means[(mode, kind)] = float(np.mean(vals))

    checks = {}
    if ("ns_ssd_ssl", MAP_CLASS) in means and ("ns_ssd", MAP_CLASS) in means:
        checks["class_full_lt_no_rep"] = (means[("ns_ssd_ssl", MAP_CLASS)]
                                          < means[("ns_ssd", MAP_CLASS)])
    if ("ns_ssd_ssl", MAP_IMAGE_ID) in means \
            and ("class_conditional", MAP_IMAGE_ID) in means:
        checks["id_full_gt_cc"] = (means[("ns_ssd_ssl", MAP_IMAGE_ID)]
                                   > means[("class_conditional", MAP_IMAGE_ID)])
    if ("class_conditional", MAP_CLASS) in means:
        checks["cc_class_zero"] = means[("class_conditional", MAP_CLASS)] == 0.0
    return ModeComparison(means=means, checks=checks)
