"""embed-export: offline corpus embedding exporter (PEM1 tables)."""

from .datasets import (DatasetError, corpus_checksum, load_cifar_batches,
                       load_dataset, load_idx_pair)
from .encoders import (CheckpointEncoder, EncoderError, HogEncoder,
                       RandomConvEncoder, get_encoder)
from .export import PEM1_MAGIC, ExportConfig, export_embeddings, write_pem1

__version__ = "0.1.0"

__all__ = [
    "CheckpointEncoder",
    "DatasetError",
    "EncoderError",
    "ExportConfig",
    "HogEncoder",
    "PEM1_MAGIC",
    "RandomConvEncoder",
    "corpus_checksum",
    "export_embeddings",
    "get_encoder",
    "load_cifar_batches",
    "load_dataset",
    "load_idx_pair",
    "write_pem1",
    "__version__",
]
