import numpy as np
import pytest
from scipy import stats

from patchgen.corpus import CorpusSelection, ImageCorpus
from patchgen.embedding import builtin_embedding
from patchgen.retrieval import CandidatePool, RetrievalConfig
from patchgen.synth import (Canvas, GenerationConfig, _box_count, generate,
                            next_pixel, place_seed, sample_pixel)
from patchgen.trace import build_maps, verify_provenance
from patchgen.validate import _recount_overlap


def test_place_seed_deterministic(tiny_corpus, tiny_selection):
    a = place_seed(tiny_corpus, tiny_selection, np.random.default_rng(3))
    b = place_seed(tiny_corpus, tiny_selection, np.random.default_rng(3))
    assert a[1].source == b[1].source
    assert np.array_equal(a[0].pixels, b[0].pixels)


def test_place_seed_contents(tiny_corpus, tiny_selection):
    canvas, placement, records = place_seed(tiny_corpus, tiny_selection,
                                            np.random.default_rng(0))
    assert canvas.filled.sum() == 64
    r0, c0 = placement.rect
    assert (r0, c0) == ((12 - 8) // 2, (12 - 8) // 2)
    src = tiny_corpus.images[placement.source.index]
    assert np.array_equal(canvas.pixels[r0:r0 + 8, c0:c0 + 8],
                          src[r0:r0 + 8, c0:c0 + 8])
    assert len(records) == 64
    assert all(r.step == 0 and r.pool_size == 1 for r in records)
    assert all(r.target == r.source_center for r in records)


def test_place_seed_single_image():
    image = np.arange(12 * 12, dtype=np.uint8).reshape(1, 12, 12, 1)
    corpus = ImageCorpus(images=image.copy(), labels=np.zeros(1, dtype=np.int64),
                         class_count=10)
    sel = CorpusSelection(indices=np.arange(1))
    canvas, placement, _ = place_seed(corpus, sel, np.random.default_rng(5))
    assert placement.source.index == 0
    assert np.array_equal(canvas.pixels[2:10, 2:10], corpus.images[0, 2:10, 2:10])


def test_next_pixel_single_filled_center():
    canvas = Canvas.blank(9, 9, 1)
    canvas.filled[4, 4] = True
    for trial in range(10):
        r, c = next_pixel(canvas, 3, np.random.default_rng(trial))
        assert max(abs(r - 4), abs(c - 4)) == 1


def test_next_pixel_forced_last():
    canvas = Canvas.blank(5, 5, 1)
    canvas.filled[:] = True
    canvas.filled[3, 1] = False
    assert next_pixel(canvas, 3, np.random.default_rng(0)) == (3, 1)


def test_next_pixel_full_canvas_errors():
    canvas = Canvas.blank(4, 4, 1)
    canvas.filled[:] = True
    with pytest.raises(ValueError, match="full"):
        next_pixel(canvas, 3, np.random.default_rng(0))


def test_overlap_matches_recount_over_steps():
    rng = np.random.default_rng(8)
    canvas = Canvas.blank(12, 12, 1)
    canvas.filled[4:8, 4:8] = True
    w = 5
    half = w // 2
    overlap = _box_count(canvas.filled, w)
    for step in range(20):
        assert np.array_equal(overlap, _recount_overlap(canvas.filled, w))
        r, c = next_pixel(canvas, w, rng)
        # the one-shot choice agrees with the incremental counts
        assert overlap[r, c] == _recount_overlap(canvas.filled, w)[r, c]
        canvas.filled[r, c] = True
        overlap[max(0, r - half):min(12, r + half + 1),
                max(0, c - half):min(12, c + half + 1)] += 1


def _pool_from_values(values):
    values = np.asarray(values, dtype=np.uint8).reshape(-1, 1)
    k = len(values)
    return CandidatePool(image_indices=np.arange(k, dtype=np.int64),
                         labels=np.zeros(k, dtype=np.int64),
                         centers=np.zeros((k, 2), dtype=np.int64),
                         ssd=np.zeros(k), emb_dist=np.zeros(k),
                         center_values=values, thresholds_used=(0.0, None))


def test_sample_single_candidate():
    pool = _pool_from_values([42])
    value, cand = sample_pixel(pool, np.random.default_rng(0))
    assert value[0] == 42
    assert cand.image.index == 0


def test_sample_empirical_frequencies():
    pool = _pool_from_values([0, 0, 255])
    rng = np.random.default_rng(123)
    draws = sum(sample_pixel(pool, rng)[0][0] == 0 for _ in range(100_000))
    assert draws / 100_000 == pytest.approx(2 / 3, abs=0.01)


def test_sample_uniformity_chi_square():
    pool = _pool_from_values(list(range(7)))
    rng = np.random.default_rng(99)
    counts = np.zeros(7)
    for _ in range(100_000):
        _, cand = sample_pixel(pool, rng)
        counts[cand.image.index] += 1
    p = stats.chisquare(counts).pvalue
    assert p > 0.001


def test_sample_empty_pool():
    pool = _pool_from_values([1])
    empty = CandidatePool(image_indices=np.zeros(0, dtype=np.int64),
                          labels=np.zeros(0, dtype=np.int64),
                          centers=np.zeros((0, 2), dtype=np.int64),
                          ssd=np.zeros(0), emb_dist=np.zeros(0),
                          center_values=np.zeros((0, 1), dtype=np.uint8),
                          thresholds_used=(None, None))
    with pytest.raises(ValueError, match="empty"):
        sample_pixel(empty, np.random.default_rng(0))
    del pool


def test_generate_single_source_corpus():
    rng = np.random.default_rng(0)
    image = rng.integers(0, 256, size=(1, 12, 12, 1)).astype(np.uint8)
    corpus = ImageCorpus(images=image, labels=np.full(1, 3, dtype=np.int64),
                         class_count=10)
    sel = CorpusSelection(indices=np.arange(1))
    table = builtin_embedding(corpus, grid=3)
    cfg = GenerationConfig(retrieval=RetrievalConfig(w=5, r_loc=2),
                           rng_seed=21)
    pixels, log = generate(corpus, sel, table, cfg)
    assert len(log) == 144
    assert all(r.source_image.index == 0 for r in log.records)
    assert verify_provenance(log, pixels, corpus)
    assert (build_maps(log).class_map == 3).all()


def test_generate_deterministic(tiny_corpus, tiny_selection, tiny_table):
    cfg = GenerationConfig(retrieval=RetrievalConfig(w=5, r_loc=2),
                           rng_seed=77)
    a = generate(tiny_corpus, tiny_selection, tiny_table, cfg)
    b = generate(tiny_corpus, tiny_selection, tiny_table, cfg)
    assert np.array_equal(a[0], b[0])
    assert a[1].records == b[1].records


def test_generate_trace_complete_and_local(tiny_corpus, tiny_selection,
                                           tiny_table):
    rcfg = RetrievalConfig(w=5, r_loc=2)
    cfg = GenerationConfig(retrieval=rcfg, rng_seed=5)
    pixels, log = generate(tiny_corpus, tiny_selection, tiny_table, cfg)
    assert log.is_complete()
    assert len(log) == 12 * 12
    seed_records = [r for r in log.records if r.step == 0]
    assert len(seed_records) == 64
    assert verify_provenance(log, pixels, tiny_corpus)
    for r in log.records:
        if r.step > 0:
            d = max(abs(r.source_center[0] - r.target[0]),
                    abs(r.source_center[1] - r.target[1]))
            assert d <= rcfg.r_loc
