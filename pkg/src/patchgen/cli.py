"""Command-line pipeline: generate samples, compute metrics, run validation.

Exit codes: 0 success, 2 configuration errors, 3 data errors, 4 validation
failure.  Worker count for candidate scoring comes from PATCHGEN_WORKERS.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .corpus import CorpusFormatError, load_cifar10, load_mnist, select
from .embedding import EmbeddingFormatError, builtin_embedding, load_embeddings
from .metrics import MAP_CLASS, MAP_IMAGE_ID, compare_modes, sliding_entropy, \
    source_usage
from .retrieval import MODES, RetrievalConfig
from .synth import GenerationConfig, generate
from .trace import build_maps, read_trace, render_maps, write_trace
from .validate import run_validation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_VALIDATION = 4

MNIST_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
CIFAR_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))


class ConfigError(ValueError):
    pass


def _load_corpus(dataset: str, data_dir: str):
    root = Path(data_dir)
    if dataset == "mnist":
        images, labels = (root / MNIST_FILES[0]), (root / MNIST_FILES[1])
        if not images.exists() or not labels.exists():
            raise CorpusFormatError(f"MNIST files not found under {root}")
        return load_mnist(images, labels)
    if dataset == "cifar10":
        paths = [root / name for name in CIFAR_FILES if (root / name).exists()]
        if not paths:
            raise CorpusFormatError(f"no CIFAR-10 batches under {root}")
        return load_cifar10(paths)
    raise ConfigError(f"unknown dataset {dataset!r}")


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _save_image(pixels: np.ndarray, path) -> None:
    if pixels.shape[-1] == 1:
        Image.fromarray(pixels[:, :, 0], mode="L").save(path, format="PNG")
    else:
        Image.fromarray(pixels, mode="RGB").save(path, format="PNG")


def _generate_args(sub):
    p = sub.add_parser("generate", help="synthesize samples with provenance")
    p.add_argument("--dataset", choices=["mnist", "cifar10"])
    p.add_argument("--data-dir")
    p.add_argument("--embeddings", help="PEM1 file; omit for the built-in encoder")
    p.add_argument("--builtin-embedding-grid", type=int, default=4)
    p.add_argument("--mode", choices=list(MODES), default="ns_ssd_ssl")
    p.add_argument("--class", dest="target_class", type=int)
    p.add_argument("--window", type=int, default=11)
    p.add_argument("--sigma", type=float)
    p.add_argument("--eps-ssd", type=float, default=0.1)
    p.add_argument("--eps-ssl", type=float, default=0.1)
    p.add_argument("--r-loc", type=int, default=4)
    p.add_argument("--corpus-size", type=int)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--from-manifest", help="reproduce a run from its manifest")
    p.set_defaults(func=cmd_generate)


def cmd_generate(args) -> int:
    if args.from_manifest:
        with open(args.from_manifest) as f:
            manifest = json.load(f)
        cfg_src = manifest["config"]
        args.dataset = manifest["dataset"]
        args.data_dir = args.data_dir or manifest["data_dir"]
        args.embeddings = manifest["embeddings_path"]
        args.builtin_embedding_grid = manifest["builtin_embedding_grid"]
        args.mode = cfg_src["mode"]
        args.target_class = cfg_src["target_class"]
        args.window = cfg_src["w"]
        args.sigma = cfg_src["sigma"]
        args.eps_ssd = cfg_src["eps_ssd"]
        args.eps_ssl = cfg_src["eps_ssl"]
        args.r_loc = cfg_src["r_loc"]
        args.corpus_size = manifest["corpus_size"]
        args.count = 1
        args.seed = manifest["sample_seed"]
    if not args.dataset or not args.data_dir:
        raise ConfigError("--dataset and --data-dir are required")

    corpus = _load_corpus(args.dataset, args.data_dir)
    if args.embeddings:
        table = load_embeddings(args.embeddings, corpus)
        emb_checksum = _file_sha256(args.embeddings)
    else:
        table = builtin_embedding(corpus, grid=args.builtin_embedding_grid)
        emb_checksum = (f"builtin:grid={args.builtin_embedding_grid}:"
                        + hashlib.sha256(table.vectors.tobytes()).hexdigest())

    class_filter = (args.target_class
                    if args.mode == "class_conditional" else None)
    selection = select(corpus, class_filter=class_filter,
                       max_images=args.corpus_size, rng_seed=args.seed)
    rcfg = RetrievalConfig(w=args.window, sigma=args.sigma,
                           eps_ssd=args.eps_ssd, eps_ssl=args.eps_ssl,
                           r_loc=args.r_loc, mode=args.mode,
                           target_class=args.target_class)

    out_root = Path(args.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        sample_seed = args.seed + i if not args.from_manifest else args.seed
        sample_dir = out_root / f"sample_{i:03d}"
        sample_dir.mkdir(exist_ok=True)
        pixels, log = generate(corpus, selection, table,
                               GenerationConfig(retrieval=rcfg,
                                                rng_seed=sample_seed))
        _save_image(pixels, sample_dir / "image.png")
        write_trace(log, sample_dir / "trace.csv")
        maps = build_maps(log)
        render_maps(maps, id_path=sample_dir / "id_map.png",
                    class_path=sample_dir / "class_map.png",
                    generated=pixels,
                    composite_path=sample_dir / "composite.png")
        manifest = {
            "tool": "patchgen",
            "version": __version__,
            "dataset": args.dataset,
            "data_dir": str(args.data_dir),
            "corpus_checksum": corpus.checksum(),
            "embeddings_path": args.embeddings,
            "builtin_embedding_grid": args.builtin_embedding_grid,
            "embedding_checksum": emb_checksum,
            "corpus_size": args.corpus_size,
            "master_seed": args.seed,
            "sample_seed": sample_seed,
            "config": {
                "w": rcfg.w, "sigma": rcfg.sigma, "eps_ssd": rcfg.eps_ssd,
                "eps_ssl": rcfg.eps_ssl, "r_loc": rcfg.r_loc,
                "mode": rcfg.mode, "target_class": rcfg.target_class,
            },
        }
        with open(sample_dir / "manifest.json", "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        print(f"wrote {sample_dir}")
    return EXIT_OK


def _metrics_args(sub):
    p = sub.add_parser("metrics", help="entropy and source-usage reports")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--entropy-window", type=int, default=7)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--out", help="write a JSON report here")
    p.set_defaults(func=cmd_metrics)


def cmd_metrics(args) -> int:
    reports_by_mode: dict = {}
    per_run = []
    for run_dir in args.run_dirs:
        run = Path(run_dir)
        trace_path = run / "trace.csv"
        if not trace_path.exists():
            raise CorpusFormatError(f"no trace.csv under {run}")
        log = read_trace(trace_path)
        maps = build_maps(log)
        mode = "unknown"
        manifest_path = run / "manifest.json"
        if manifest_path.exists():
            with open(manifest_path) as f:
                mode = json.load(f)["config"]["mode"]
        class_rep = sliding_entropy(maps.class_map, args.entropy_window,
                                    args.stride, MAP_CLASS)
        id_rep = sliding_entropy(maps.id_map, args.entropy_window,
                                 args.stride, MAP_IMAGE_ID)
        usage = source_usage(log, k=args.top_k)
        reports_by_mode.setdefault(mode, []).extend([class_rep, id_rep])
        per_run.append({
            "run": str(run), "mode": mode,
            "class_entropy": class_rep.mean_entropy,
            "id_entropy": id_rep.mean_entropy,
            "dominance": usage.dominance,
            "top_k": usage.top_k,
        })
        print(f"{run}  mode={mode}  class={class_rep.mean_entropy:.4f}  "
              f"id={id_rep.mean_entropy:.4f}  dominance={usage.dominance:.3f}")

    comparison = compare_modes(reports_by_mode)
    print("mode means:")
    for (mode, kind), value in sorted(comparison.means.items()):
        print(f"  {mode:18s} {kind:9s} {value:.4f}")
    for name, ok in comparison.checks.items():
        print(f"  check {name}: {ok}")

    if args.out:
        payload = {
            "runs": per_run,
            "means": {f"{m}/{k}": v for (m, k), v in comparison.means.items()},
            "checks": comparison.checks,
        }
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
    return EXIT_OK


def _validate_args(sub):
    p = sub.add_parser("validate", help="oracle-equivalence release gate")
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)


def cmd_validate(args) -> int:
    report = run_validation(rng_seed=args.seed, n_queries=args.queries)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchgen",
        description="training-free non-parametric image generator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    _generate_args(sub)
    _metrics_args(sub)
    _validate_args(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusFormatError, EmbeddingFormatError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
