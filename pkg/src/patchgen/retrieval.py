"""Candidate pool construction: the three-stage filter and its oracle.

For a partially filled context window around a target pixel, the pool is
built by (1) restricting candidate centers to an L-inf ball around the target
coordinate, (2) keeping only source images whose embedding lies within an
adaptive radius of the conditioning vector, and (3) keeping candidates whose
Gaussian-weighted masked SSD lies within an adaptive radius of the best
survivor.  Depending on the ablation mode, individual stages are skipped or
(for class conditioning) replaced by a label-equality filter.

``oracle_pool`` re-derives the same pool by plain exhaustive enumeration and
is the verification route for ``build_pool``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np

from ._kernels import score_windows, seq_l2
from .corpus import CorpusSelection, ImageCorpus, ImageRef
from .embedding import ORIGIN_NONE, ConditioningVector, EmbeddingTable

MODES = ("ssd_only", "ns_ssd", "ns_ssd_ssl", "ns_ssl", "class_conditional")

WORKERS_ENV = "PATCHGEN_WORKERS"


class PoolError(RuntimeError):
    """Raised when no admissible candidate exists for a query."""


@dataclass(frozen=True)
class RetrievalConfig:
    """Filter parameters and ablation mode.

    ``sigma`` defaults to w/6.4 (the classical texture-synthesis choice);
    ``target_class`` is only consulted in class_conditional mode.
    """

    w: int = 11
    sigma: float | None = None
    eps_ssd: float = 0.1
    eps_ssl: float = 0.1
    r_loc: int = 4
    mode: str = "ns_ssd_ssl"
    target_class: int | None = None

    def __post_init__(self):
        if self.w < 3 or self.w % 2 == 0:
            raise ValueError("w must be odd and >= 3")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.eps_ssd < 0 or self.eps_ssl < 0:
            raise ValueError("eps values must be >= 0")
        if self.r_loc < 0:
            raise ValueError("r_loc must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def sigma_value(self) -> float:
        return self.sigma if self.sigma is not None else self.w / 6.4

    @property
    def uses_locality(self) -> bool:
        return self.mode != "ssd_only"

    @property
    def uses_embedding(self) -> bool:
        return self.mode in ("ns_ssd_ssl", "ns_ssl")

    @property
    def uses_ssd(self) -> bool:
        return self.mode != "ns_ssl"


@dataclass(frozen=True)
class ContextQuery:
    """A w x w window around one unfilled target pixel, with its filled-mask."""

    target: tuple[int, int]
    window: np.ndarray  # (w, w, Ch) uint8
    mask: np.ndarray    # (w, w) bool, True = filled
    canvas_dims: tuple[int, int]

    def __post_init__(self):
        w = self.mask.shape[0]
        if self.mask.shape != (w, w) or self.window.shape[:2] != (w, w):
            raise ValueError("window and mask must be w x w")
        if w < 3 or w % 2 == 0 or w > min(self.canvas_dims):
            raise ValueError("w must be odd, >= 3 and fit the canvas")
        if not self.mask.any():
            raise ValueError("query mask must contain at least one filled pixel")
        if self.mask[w // 2, w // 2]:
            raise ValueError("query center must be unfilled")

    @property
    def w(self) -> int:
        return self.mask.shape[0]


@dataclass(frozen=True)
class Candidate:
    image: ImageRef
    center: tuple[int, int]
    ssd: float
    emb_dist: float
    center_value: tuple


@dataclass(frozen=True)
class CandidatePool:
    """Admissible candidates in canonical (image index, row, col) order.

    Stored as parallel arrays because pools can be large (uniform background
    regions match almost everywhere); ``candidates`` materializes objects on
    demand.
    """

    image_indices: np.ndarray   # (K,) int64
    labels: np.ndarray          # (K,) int64
    centers: np.ndarray         # (K, 2) int64
    ssd: np.ndarray             # (K,) float64
    emb_dist: np.ndarray        # (K,) float64
    center_values: np.ndarray   # (K, Ch) uint8
    thresholds_used: tuple      # (R_SSD or None, R_SSL or None)

    def __len__(self) -> int:
        return int(self.image_indices.size)

    def candidate(self, i: int) -> Candidate:
        return Candidate(
            image=ImageRef(index=int(self.image_indices[i]),
                           label=int(self.labels[i])),
            center=(int(self.centers[i, 0]), int(self.centers[i, 1])),
            ssd=float(self.ssd[i]),
            emb_dist=float(self.emb_dist[i]),
            center_value=tuple(int(v) for v in self.center_values[i]),
        )

    @cached_property
    def candidates(self) -> list[Candidate]:
        return [self.candidate(i) for i in range(len(self))]

    def key_set(self) -> set[tuple[int, int, int]]:
        """(image index, center row, center col) triples, for set comparison."""
        return {(int(i), int(r), int(c))
                for i, (r, c) in zip(self.image_indices, self.centers)}


def gaussian_kernel(w: int, sigma: float) -> np.ndarray:
    """Unnormalized isotropic Gaussian weights on a w x w grid, peak 1 at center."""
    if w % 2 == 0 or w < 1:
        raise ValueError("w must be odd")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    c = (w - 1) / 2
    ii, jj = np.mgrid[0:w, 0:w]
    return np.exp(-(((ii - c) ** 2) + ((jj - c) ** 2)) / (2.0 * sigma * sigma))


def masked_ssd(query: ContextQuery, cand_window: np.ndarray,
               cand_valid: np.ndarray, kernel: np.ndarray) -> float:
    """Gaussian-weighted mean squared difference over jointly valid pixels.

    Differences are per channel in [0, 1] scale and summed over channels; the
    weighted sum is divided by the covered Gaussian mass, so the value is
    comparable across masks of different coverage.
    """
    joint = query.mask & cand_valid
    if not joint.any():
        raise ValueError("empty joint mask")
    q = query.window.astype(np.float64) / 255.0
    s = cand_window.astype(np.float64) / 255.0
    d2 = ((q - s) ** 2).sum(axis=-1)
    wmask = kernel * joint
    return float((wmask * d2).sum() / wmask.sum())


def _max_workers() -> int:
    return int(numba.config.NUMBA_NUM_THREADS)


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, _max_workers()))
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return min(workers, _max_workers())


class Retriever:
    """Pool builder with per-generation precomputation.

    The conditioning vector is fixed for a whole generation and locality never
    empties an image's center set (canvas and source dims are equal), so the
    embedding filter's survivor set and threshold are computed once up front.
    """

    def __init__(self, corpus: ImageCorpus, selection: CorpusSelection,
                 table: EmbeddingTable | None, z: ConditioningVector,
                 cfg: RetrievalConfig, workers: int | None = None):
        if cfg.uses_embedding:
            if table is None:
                raise ValueError(f"mode {cfg.mode} requires an embedding table")
            if z.origin == ORIGIN_NONE:
                raise ValueError(f"mode {cfg.mode} requires a conditioning vector")
        if cfg.mode == "class_conditional" and cfg.target_class is None:
            raise ValueError("class_conditional mode requires target_class")
        if cfg.w > min(corpus.height, corpus.width):
            raise ValueError("window larger than source images")

        self.corpus = corpus
        self.cfg = cfg
        self.workers = workers
        self.kernel = gaussian_kernel(cfg.w, cfg.sigma_value)
        self._half = cfg.w // 2

        sel = selection.indices
        # Stage 2 is constant per generation: embedding radius or class label.
        if cfg.mode == "class_conditional":
            keep = corpus.labels[sel] == cfg.target_class
            if not keep.any():
                raise PoolError(f"no selected images of class {cfg.target_class}")
            emb = np.zeros(int(keep.sum()))
            self.r_ssl = None
        elif cfg.uses_embedding:
            dists = seq_l2(table.vectors[sel].astype(np.float64),
                           z.z.astype(np.float64))
            self.r_ssl = float((1.0 + cfg.eps_ssl) * dists.min())
            keep = dists <= self.r_ssl
            emb = dists[keep]
        else:
            keep = np.ones(sel.size, dtype=bool)
            emb = np.zeros(sel.size)
            self.r_ssl = None

        self.sources = sel[keep]               # ascending image indices
        self.source_labels = corpus.labels[self.sources]
        self.source_emb = emb

        h, w = corpus.height, corpus.width
        pad = self._half
        padded = np.zeros((self.sources.size, h + 2 * pad, w + 2 * pad,
                           corpus.channels), dtype=np.float64)
        padded[:, pad:pad + h, pad:pad + w, :] = \
            corpus.images[self.sources].astype(np.float64) / 255.0
        valid = np.zeros((h + 2 * pad, w + 2 * pad), dtype=np.uint8)
        valid[pad:pad + h, pad:pad + w] = 1
        self._padded = padded
        self._valid = valid

    def _center_grid(self, query: ContextQuery):
        h, w = self.corpus.height, self.corpus.width
        if self.cfg.uses_locality:
            pr, pc = query.target
            r = self.cfg.r_loc
            rows = np.arange(max(0, pr - r), min(h - 1, pr + r) + 1)
            cols = np.arange(max(0, pc - r), min(w - 1, pc + r) + 1)
            if rows.size == 0 or cols.size == 0:
                raise PoolError("locality window misses all source coordinates")
        else:
            rows = np.arange(h)
            cols = np.arange(w)
        return rows.astype(np.int64), cols.astype(np.int64)

    def pool(self, query: ContextQuery) -> CandidatePool:
        cfg = self.cfg
        rows, cols = self._center_grid(query)
        numba.set_num_threads(_resolve_workers(self.workers))

        if cfg.uses_ssd:
            ys, xs = np.nonzero(query.mask)
            offs = np.stack([ys - self._half, xs - self._half],
                            axis=1).astype(np.int64)
            qvals = query.window[ys, xs].astype(np.float64) / 255.0
            gw = self.kernel[ys, xs]
            scores = score_windows(self._padded, self._valid, rows, cols,
                                   offs, qvals, gw, self._half)
            best = scores.min()
            if not np.isfinite(best):
                raise PoolError("no candidate overlaps the filled context")
            r_ssd = float((1.0 + cfg.eps_ssd) * best)
            keep = scores <= r_ssd
        else:
            scores = np.zeros((self.sources.size, rows.size, cols.size))
            r_ssd = None
            keep = np.ones_like(scores, dtype=bool)

        si, ai, bi = np.nonzero(keep)  # raster order == canonical pool order
        img = self.sources[si]
        centers = np.stack([rows[ai], cols[bi]], axis=1)
        return CandidatePool(
            image_indices=img,
            labels=self.source_labels[si],
            centers=centers,
            ssd=scores[si, ai, bi],
            emb_dist=self.source_emb[si],
            center_values=self.corpus.images[img, centers[:, 0], centers[:, 1]],
            thresholds_used=(r_ssd, self.r_ssl),
        )


def build_pool(query: ContextQuery, corpus: ImageCorpus,
               selection: CorpusSelection, table: EmbeddingTable | None,
               z: ConditioningVector, cfg: RetrievalConfig,
               workers: int | None = None) -> CandidatePool:
    """One-shot pool construction; use Retriever directly for repeated queries."""
    return Retriever(corpus, selection, table, z, cfg, workers=workers).pool(query)


# ---------------------------------------------------------------------------
# Exhaustive verification oracle.  Independent enumeration and staging; only
# the canonical accumulation order is shared by construction (see _kernels).
# ---------------------------------------------------------------------------

from numba import njit  # noqa: E402


@njit(cache=True)
def _one_candidate_ssd(qvals, offs, gw, padded_img, valid, r, c, half):
    acc = 0.0
    ws = 0.0
    for m in range(offs.shape[0]):
        rp = r + half + offs[m, 0]
        cp = c + half + offs[m, 1]
        if valid[rp, cp]:
            d2 = 0.0
            for k in range(qvals.shape[1]):
                diff = qvals[m, k] - padded_img[rp, cp, k]
                d2 += diff * diff
            acc += gw[m] * d2
            ws += gw[m]
    if ws > 0.0:
        return acc / ws
    return np.inf


def oracle_pool(query: ContextQuery, corpus: ImageCorpus,
                selection: CorpusSelection, table: EmbeddingTable | None,
                z: ConditioningVector, cfg: RetrievalConfig) -> CandidatePool:
    """Brute-force reference for build_pool: enumerate everything, filter directly."""
    if cfg.uses_embedding and (table is None or z.origin == ORIGIN_NONE):
        raise ValueError(f"mode {cfg.mode} requires embeddings and conditioning")
    if cfg.mode == "class_conditional" and cfg.target_class is None:
        raise ValueError("class_conditional mode requires target_class")

    h, w_img = corpus.height, corpus.width
    half = cfg.w // 2
    kernel = gaussian_kernel(cfg.w, cfg.sigma_value)
    pr, pc = query.target

    # Stage 1: admissible centers per image (identical for every image).
    if cfg.uses_locality:
        centers = [(r, c)
                   for r in range(max(0, pr - cfg.r_loc),
                                  min(h - 1, pr + cfg.r_loc) + 1)
                   for c in range(max(0, pc - cfg.r_loc),
                                  min(w_img - 1, pc + cfg.r_loc) + 1)]
    else:
        centers = [(r, c) for r in range(h) for c in range(w_img)]
    if not centers:
        raise PoolError("locality window misses all source coordinates")

    # Stage 2: per-image semantic filter.
    survivors = []  # (image index, embedding distance)
    r_ssl = None
    if cfg.mode == "class_conditional":
        for i in selection.indices:
            if int(corpus.labels[i]) == cfg.target_class:
                survivors.append((int(i), 0.0))
        if not survivors:
            raise PoolError(f"no selected images of class {cfg.target_class}")
    elif cfg.uses_embedding:
        zv = z.z.astype(np.float64)
        dists = []
        for i in selection.indices:
            row = table.vectors[int(i)].astype(np.float64)
            acc = 0.0
            for d in range(row.shape[0]):
                diff = row[d] - zv[d]
                acc += diff * diff
            dists.append((int(i), math.sqrt(acc)))
        r_ssl = (1.0 + cfg.eps_ssl) * min(d for _, d in dists)
        survivors = [(i, d) for i, d in dists if d <= r_ssl]
    else:
        survivors = [(int(i), 0.0) for i in selection.indices]

    # Stage 3: appearance filter over every (image, center) pair.
    ys, xs = [], []
    for y in range(cfg.w):
        for x in range(cfg.w):
            if query.mask[y, x]:
                ys.append(y)
                xs.append(x)
    offs = np.array([[y - half, x - half] for y, x in zip(ys, xs)], dtype=np.int64)
    qvals = np.array([query.window[y, x].astype(np.float64) / 255.0
                      for y, x in zip(ys, xs)])
    gw = np.array([kernel[y, x] for y, x in zip(ys, xs)])
    valid = np.zeros((h + 2 * half, w_img + 2 * half), dtype=np.uint8)
    valid[half:half + h, half:half + w_img] = 1

    scored = []
    for i, emb in survivors:
        padded = np.zeros((h + 2 * half, w_img + 2 * half, corpus.channels))
        padded[half:half + h, half:half + w_img] = \
            corpus.images[i].astype(np.float64) / 255.0
        for (r, c) in centers:
            if cfg.uses_ssd:
                s = _one_candidate_ssd(qvals, offs, gw, padded, valid,
                                       r, c, half)
            else:
                s = 0.0
            scored.append((i, r, c, s, emb))

    r_ssd = None
    if cfg.uses_ssd:
        finite = [s for (_, _, _, s, _) in scored if np.isfinite(s)]
        if not finite:
            raise PoolError("no candidate overlaps the filled context")
        r_ssd = (1.0 + cfg.eps_ssd) * min(finite)
        scored = [t for t in scored if t[3] <= r_ssd]

    scored.sort(key=lambda t: (t[0], t[1], t[2]))
    img = np.array([t[0] for t in scored], dtype=np.int64)
    centers_arr = np.array([[t[1], t[2]] for t in scored],
                           dtype=np.int64).reshape(-1, 2)
    return CandidatePool(
        image_indices=img,
        labels=corpus.labels[img],
        centers=centers_arr,
        ssd=np.array([t[3] for t in scored]),
        emb_dist=np.array([t[4] for t in scored]),
        center_values=corpus.images[img, centers_arr[:, 0], centers_arr[:, 1]],
        thresholds_used=(r_ssd, r_ssl),
    )
