"""Self-contained release gate: oracle equivalence on synthetic corpora.

Runs the optimized pool builder against the exhaustive enumeration oracle for
random partial-context queries in every mode, and the incremental fill-order
overlap counts against a direct recount.  All inputs are generated from a
seed; no dataset files are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import retrieval, synth
from .corpus import CorpusSelection, ImageCorpus
from .embedding import builtin_embedding, make_conditioning, no_conditioning
from .retrieval import ContextQuery, RetrievalConfig


@dataclass
class ValidationReport:
    comparisons: int = 0
    overlap_checks: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"oracle comparisons: {self.comparisons}",
                 f"overlap checks:     {self.overlap_checks}",
                 f"mismatches:         {len(self.mismatches)}",
                 f"result:             {status}"]
        lines += [f"  {m}" for m in self.mismatches[:20]]
        return "\n".join(lines)


def make_synthetic_corpus(n: int = 64, size: int = 12, classes: int = 2,
                          channels: int = 1, rng_seed: int = 7) -> ImageCorpus:
    """Random smooth-ish images with a class-dependent brightness ramp."""
    rng = np.random.default_rng(rng_seed)
    labels = rng.integers(classes, size=n)
    base = rng.integers(0, 256, size=(n, size, size, channels))
    ramp = np.linspace(0, 60, size)[None, :, None, None]
    images = np.clip(base * 0.7 + ramp * (1 + labels[:, None, None, None]),
                     0, 255).astype(np.uint8)
    return ImageCorpus(images=images, labels=labels.astype(np.int64),
                       class_count=classes)


def random_query(rng: np.random.Generator, canvas_dims: tuple[int, int],
                 w: int, channels: int) -> ContextQuery:
    h, wd = canvas_dims
    target = (int(rng.integers(h)), int(rng.integers(wd)))
    window = rng.integers(0, 256, size=(w, w, channels)).astype(np.uint8)
    mask = rng.random((w, w)) < 0.5
    mask[w // 2, w // 2] = False
    if not mask.any():
        mask[0, 0] = True
    return ContextQuery(target=target, window=window, mask=mask,
                        canvas_dims=canvas_dims)


def _pools_equal(fast, slow) -> str | None:
    if fast.thresholds_used != slow.thresholds_used:
        return (f"thresholds differ: {fast.thresholds_used} "
                f"vs {slow.thresholds_used}")
    fk, sk = fast.key_set(), slow.key_set()
    if fk != sk:
        return (f"pool members differ: {len(fk)} vs {len(sk)} candidates, "
                f"symmetric difference {len(fk ^ sk)}")
    return None


def run_validation(rng_seed: int = 0, n_queries: int = 100,
                   overlap_steps: int = 20) -> ValidationReport:
    report = ValidationReport()
    corpus = make_synthetic_corpus()
    selection = CorpusSelection(indices=np.arange(corpus.count))
    table = builtin_embedding(corpus, grid=3)
    rng = np.random.default_rng(rng_seed)
    dims = (corpus.height, corpus.width)

    for q in range(n_queries):
        query = random_query(rng, dims, w=5, channels=corpus.channels)
        z_seed = make_conditioning(corpus.ref(int(rng.integers(corpus.count))),
                                   table)
        for mode in retrieval.MODES:
            cfg = RetrievalConfig(w=5, r_loc=2, mode=mode,
                                  target_class=int(rng.integers(2))
                                  if mode == "class_conditional" else None)
            z = z_seed if cfg.uses_embedding else no_conditioning()
            fast = retrieval.build_pool(query, corpus, selection, table, z, cfg)
            slow = retrieval.oracle_pool(query, corpus, selection, table, z, cfg)
            report.comparisons += 1
            problem = _pools_equal(fast, slow)
            if problem:
                report.mismatches.append(f"query {q} mode {mode}: {problem}")

    # Incremental overlap maintenance vs exhaustive recount.
    canvas = synth.Canvas.blank(*dims, corpus.channels)
    r0 = (dims[0] - 4) // 2
    canvas.filled[r0:r0 + 4, r0:r0 + 4] = True
    w = 5
    half = w // 2
    overlap = synth._box_count(canvas.filled, w)
    order_rng = np.random.default_rng(rng_seed + 1)
    for step in range(overlap_steps):
        recount = _recount_overlap(canvas.filled, w)
        report.overlap_checks += 1
        if not np.array_equal(overlap, recount):
            report.mismatches.append(f"overlap counts diverged at step {step}")
            break
        r, c = synth._pick(overlap, canvas.filled, order_rng)
        canvas.filled[r, c] = True
        overlap[max(0, r - half):min(dims[0], r + half + 1),
                max(0, c - half):min(dims[1], c + half + 1)] += 1
    return report


def _recount_overlap(filled: np.ndarray, w: int) -> np.ndarray:
    """Direct double-loop recount of filled pixels per window."""
    h, wd = filled.shape
    half = w // 2
    out = np.zeros((h, wd), dtype=np.int64)
    for r in range(h):
        for c in range(wd):
            count = 0
            for dr in range(-half, half + 1):
                for dc in range(-half, half + 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < wd and filled[rr, cc]:
                        count += 1
            out[r, c] = count
    return out
