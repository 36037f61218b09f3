"""Cross-component acceptance: the exported table must serve the engine.

The generation engine (``patchgen``) is only touched through its public
embedding loader, i.e. through the PEM1 file on disk.
"""

import sys

import numpy as np
import pytest

from embed_export import ExportConfig, export_embeddings


def _line(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[secondary] {name}: {status}  {detail}".rstrip(),
          file=sys.__stdout__, flush=True)
    assert ok, f"{name} failed: {detail}"


@pytest.fixture(scope="module")
def exported(digit_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("export") / "digits.pem1"
    manifest = export_embeddings(ExportConfig(dataset="mnist",
                                              data_dir=str(digit_dir),
                                              out_path=str(out)))
    return out, manifest


def test_primary_engine_loads_export(exported, digit_data):
    from patchgen.corpus import ImageCorpus
    from patchgen.embedding import load_embeddings

    out, manifest = exported
    images, labels = digit_data
    corpus = ImageCorpus(images=images.copy(), labels=labels.copy(),
                         class_count=10)
    table = load_embeddings(out, corpus)
    ok = (table.count == corpus.count == manifest["count"]
          and np.isfinite(table.vectors).all()
          and corpus.checksum() == manifest["corpus_checksum"])
    _line("PEM1 loads in generation engine", ok,
          f"N={table.count}, D={table.dim}, checksums match: "
          f"{corpus.checksum() == manifest['corpus_checksum']}")


def test_within_class_distance_below_cross_class(exported, digit_data):
    out, _ = exported
    raw = out.read_bytes()
    vecs = np.frombuffer(raw[12:], dtype="<f4").reshape(100, -1).astype(float)
    labels = digit_data[1]
    d = np.linalg.norm(vecs[:, None] - vecs[None, :], axis=-1)
    iu = np.triu_indices(len(labels), 1)
    same = (labels[:, None] == labels[None, :])[iu]
    within = float(d[iu][same].mean())
    cross = float(d[iu][~same].mean())
    _line("within-class < cross-class mean distance", within < cross,
          f"within={within:.4f} cross={cross:.4f}")
