"""Non-parametric, training-free image generator with per-pixel provenance.

Images are grown pixel by pixel from an 8x8 seed.  Each new pixel is sampled
uniformly from the center values of a pool of source patches that pass a
three-stage filter (locality, embedding similarity, Gaussian-weighted masked
SSD).  Every sampled pixel is traced back to its source image and coordinates.
"""

import os

# The scoring kernels run on numba's threading layer.  PATCHGEN_WORKERS caps
# the worker count and must be applied before numba is first imported.
if "PATCHGEN_WORKERS" in os.environ and "NUMBA_NUM_THREADS" not in os.environ:
    os.environ["NUMBA_NUM_THREADS"] = os.environ["PATCHGEN_WORKERS"]

__version__ = "0.1.0"

from .corpus import (  # noqa: E402
    CorpusFormatError,
    CorpusSelection,
    ImageCorpus,
    ImageRef,
    load_cifar10,
    load_mnist,
    save_cifar10,
    save_mnist,
    select,
)
from .embedding import (  # noqa: E402
    ConditioningVector,
    EmbeddingFormatError,
    EmbeddingTable,
    builtin_embedding,
    embedding_distance,
    load_embeddings,
    make_conditioning,
    no_conditioning,
    save_embeddings,
    user_conditioning,
)
from .retrieval import (  # noqa: E402
    Candidate,
    CandidatePool,
    ContextQuery,
    RetrievalConfig,
    Retriever,
    build_pool,
    gaussian_kernel,
    masked_ssd,
    oracle_pool,
)
from .synth import (  # noqa: E402
    Canvas,
    GenerationConfig,
    SeedPlacement,
    generate,
    next_pixel,
    place_seed,
    sample_pixel,
)
from .trace import (  # noqa: E402
    SourceMaps,
    TraceLog,
    TraceRecord,
    build_maps,
    read_trace,
    render_maps,
    verify_provenance,
    write_trace,
)
from .metrics import (  # noqa: E402
    EntropyReport,
    ModeComparison,
    SourceUsage,
    compare_modes,
    sliding_entropy,
    source_usage,
)
from .validate import (  # noqa: E402
    ValidationReport,
    run_validation,
)
