"""The generation loop: seed placement, fill order, sampling, provenance.

A canvas the size of a source image is seeded with an 8x8 block copied from a
randomly chosen source image at the same (centered) coordinates, then filled
one pixel at a time.  The next pixel is always one whose w x w window overlaps
the most already-filled pixels; its value is drawn uniformly from the
candidate pool's center pixels.  Everything is driven by sub-streams of a
single master seed, consumed in a fixed order (seed choice, tie-breaks, pool
draws), so a generation is a pure function of corpus, embeddings, and config.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .corpus import CorpusSelection, ImageCorpus
from .embedding import EmbeddingTable, ConditioningVector, make_conditioning, \
    no_conditioning
from .retrieval import (CandidatePool, ContextQuery, RetrievalConfig,
                        Retriever, Candidate)
from .trace import TraceLog, TraceRecord

SEED_SIZE = 8


@dataclass
class Canvas:
    """Partially synthesized image plus its filled-mask."""

    pixels: np.ndarray  # (H, W, Ch) uint8
    filled: np.ndarray  # (H, W) bool
    step_counter: int = 0

    @classmethod
    def blank(cls, height: int, width: int, channels: int) -> "Canvas":
        return cls(pixels=np.zeros((height, width, channels), dtype=np.uint8),
                   filled=np.zeros((height, width), dtype=bool))

    @property
    def dims(self) -> tuple[int, int]:
        return self.pixels.shape[:2]

    def is_full(self) -> bool:
        return bool(self.filled.all())


@dataclass(frozen=True)
class SeedPlacement:
    source: object            # ImageRef
    rect: tuple[int, int]     # top-left of the seed block on the canvas
    size: int = SEED_SIZE     # source_rect equals rect by construction


@dataclass(frozen=True)
class GenerationConfig:
    retrieval: RetrievalConfig
    rng_seed: int
    seed_size: int = SEED_SIZE
    workers: int | None = None


def _rng_streams(master_seed: int):
    """Master seed -> (seed choice, fill-order tie-breaks, pool draws)."""
    streams = np.random.SeedSequence(master_seed).spawn(3)
    return tuple(np.random.default_rng(s) for s in streams)


def place_seed(corpus: ImageCorpus, selection: CorpusSelection,
               rng: np.random.Generator, target_class: int | None = None,
               seed_size: int = SEED_SIZE):
    """Copy a centered seed block from a uniformly chosen source image.

    The block lands at the same coordinates it occupies in the source, so the
    very first pixels already respect position statistics.  Returns the
    canvas, the placement, and one step-0 trace record per seed pixel.
    """
    h, w = corpus.height, corpus.width
    if h < seed_size or w < seed_size:
        raise ValueError("corpus images smaller than the seed block")
    domain = selection.indices
    if target_class is not None:
        domain = domain[corpus.labels[domain] == target_class]
        if domain.size == 0:
            raise ValueError(f"no selected images of class {target_class}")
    source = corpus.ref(int(domain[rng.integers(domain.size)]))

    r0 = (h - seed_size) // 2
    c0 = (w - seed_size) // 2
    canvas = Canvas.blank(h, w, corpus.channels)
    canvas.pixels[r0:r0 + seed_size, c0:c0 + seed_size] = \
        corpus.images[source.index, r0:r0 + seed_size, c0:c0 + seed_size]
    canvas.filled[r0:r0 + seed_size, c0:c0 + seed_size] = True

    records = [TraceRecord(step=0, target=(r, c), source_image=source,
                           source_center=(r, c), class_label=source.label,
                           pool_size=1)
               for r in range(r0, r0 + seed_size)
               for c in range(c0, c0 + seed_size)]
    return canvas, SeedPlacement(source=source, rect=(r0, c0), size=seed_size), records


def _box_count(filled: np.ndarray, w: int) -> np.ndarray:
    """Per-pixel count of filled pixels inside the w x w window (zero padded)."""
    half = w // 2
    padded = np.pad(filled.astype(np.int32), half)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (w, w))
    return windows.sum(axis=(2, 3))


def _pick(overlap: np.ndarray, filled: np.ndarray,
          rng: np.random.Generator) -> tuple[int, int]:
    """Unfilled pixel with maximal window overlap; RNG tie-break over the argmax set."""
    if filled.all():
        raise ValueError("canvas already full")
    candidates = ~filled & (overlap > 0)
    if not candidates.any():
        raise ValueError("no unfilled pixel touches the filled region")
    best = overlap[candidates].max()
    ties = np.argwhere(candidates & (overlap == best))  # raster order
    r, c = ties[rng.integers(ties.shape[0])]
    return int(r), int(c)


def next_pixel(canvas: Canvas, w: int, rng: np.random.Generator) -> tuple[int, int]:
    """One-shot fill-order choice, recomputing overlap counts from the canvas."""
    return _pick(_box_count(canvas.filled, w), canvas.filled, rng)


def _make_query(canvas: Canvas, target: tuple[int, int], w: int) -> ContextQuery:
    half = w // 2
    h, wd = canvas.dims
    window = np.zeros((w, w, canvas.pixels.shape[2]), dtype=np.uint8)
    mask = np.zeros((w, w), dtype=bool)
    r, c = target
    r0, r1 = max(0, r - half), min(h, r + half + 1)
    c0, c1 = max(0, c - half), min(wd, c + half + 1)
    window[r0 - r + half:r1 - r + half, c0 - c + half:c1 - c + half] = \
        canvas.pixels[r0:r1, c0:c1]
    mask[r0 - r + half:r1 - r + half, c0 - c + half:c1 - c + half] = \
        canvas.filled[r0:r1, c0:c1]
    return ContextQuery(target=target, window=window, mask=mask,
                        canvas_dims=(h, wd))


def sample_pixel(pool: CandidatePool,
                 rng: np.random.Generator) -> tuple[np.ndarray, Candidate]:
    """Uniform draw over the canonically ordered pool."""
    if len(pool) == 0:
        raise ValueError("empty candidate pool")
    i = int(rng.integers(len(pool)))
    return pool.center_values[i].copy(), pool.candidate(i)


def generate(corpus: ImageCorpus, selection: CorpusSelection,
             table: EmbeddingTable | None, cfg: GenerationConfig,
             z: ConditioningVector | None = None):
    """Grow one full image; returns (pixels, trace log).

    ``z`` overrides the default seed-image conditioning (user-supplied mode).
    In class_conditional mode without an explicit target class, the seed
    image's label becomes the target.
    """
    rcfg = cfg.retrieval
    seed_rng, order_rng, sample_rng = _rng_streams(cfg.rng_seed)

    seed_class = rcfg.target_class if rcfg.mode == "class_conditional" else None
    canvas, placement, records = place_seed(corpus, selection, seed_rng,
                                            target_class=seed_class,
                                            seed_size=cfg.seed_size)
    if rcfg.mode == "class_conditional" and rcfg.target_class is None:
        rcfg = replace(rcfg, target_class=placement.source.label)

    # The seed block is a verbatim copy, so the seed image scores an exact 0
    # under both adaptive filters (embedding distance to its own vector, SSD
    # against its own pixels), collapsing the (1+eps)*min radii to 0 and the
    # generation to a copy of that one image.  Leave the seed image out of
    # the source set whenever an alternative exists.
    retrieval_selection = selection
    others = selection.indices[selection.indices != placement.source.index]
    if others.size:
        retrieval_selection = CorpusSelection(indices=others)

    if rcfg.uses_embedding:
        if z is None:
            if table is None:
                raise ValueError(f"mode {rcfg.mode} requires an embedding table")
            z = make_conditioning(placement.source, table)
    else:
        z = no_conditioning()

    retriever = Retriever(corpus, retrieval_selection, table, z, rcfg,
                          workers=cfg.workers)

    # Overlap counts are maintained incrementally; only the w x w neighborhood
    # of a newly filled pixel changes.
    w = rcfg.w
    half = w // 2
    h, wd = canvas.dims
    overlap = _box_count(canvas.filled, w)

    step = 1
    while not canvas.is_full():
        target = _pick(overlap, canvas.filled, order_rng)
        query = _make_query(canvas, target, w)
        pool = retriever.pool(query)
        value, cand = sample_pixel(pool, sample_rng)

        canvas.pixels[target] = value
        canvas.filled[target] = True
        canvas.step_counter = step
        r, c = target
        overlap[max(0, r - half):min(h, r + half + 1),
                max(0, c - half):min(wd, c + half + 1)] += 1

        records.append(TraceRecord(step=step, target=target,
                                   source_image=cand.image,
                                   source_center=cand.center,
                                   class_label=cand.image.label,
                                   pool_size=len(pool)))
        step += 1

    log = TraceLog(records=tuple(records), height=h, width=wd)
    return canvas.pixels.copy(), log
