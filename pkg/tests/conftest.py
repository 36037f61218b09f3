import os
import sys
from pathlib import Path

# The worker-independence tests need more numba threads than this box has
# cores; the cap must be in place before numba is first imported.
os.environ.setdefault("NUMBA_NUM_THREADS", "8")

sys.path.insert(0, str(Path(__file__).parent))

import numpy as np
import pytest

from patchgen.corpus import CorpusSelection, select
from patchgen.embedding import builtin_embedding
from patchgen.validate import make_synthetic_corpus


@pytest.fixture(scope="session")
def tiny_corpus():
    """64 synthetic 12x12 single-channel images, 2 classes."""
    return make_synthetic_corpus(n=64, size=12, classes=2, rng_seed=7)


@pytest.fixture(scope="session")
def tiny_selection(tiny_corpus):
    return CorpusSelection(indices=np.arange(tiny_corpus.count))


@pytest.fixture(scope="session")
def tiny_table(tiny_corpus):
    return builtin_embedding(tiny_corpus, grid=3)


@pytest.fixture(scope="session")
def digit_corpus_small():
    """300 MNIST-shaped digit images for fast end-to-end tests."""
    from digitgen import digit_corpus
    return digit_corpus(300, rng_seed=11)


@pytest.fixture(scope="session")
def digit_corpus_large():
    """5000 MNIST-shaped digit images for the acceptance batches."""
    from digitgen import digit_corpus
    return digit_corpus(5000, rng_seed=1)
