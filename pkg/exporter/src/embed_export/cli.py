"""Command-line entry point.

Exit codes: 0 success, 2 configuration errors, 3 data/encoder errors.
"""

from __future__ import annotations

import argparse
import sys

from .datasets import DatasetError
from .encoders import EncoderError
from .export import ExportConfig, export_embeddings

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="export per-image embeddings of a corpus as a PEM1 table")
    parser.add_argument("--dataset", choices=["mnist", "cifar10"],
                        required=True)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--encoder", default="random-conv",
                        help="random-conv, hog, or checkpoint:<path>")
    parser.add_argument("--layer-tap", choices=["penultimate", "head"],
                        default="penultimate")
    parser.add_argument("--out", required=True, help="PEM1 output path")
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExportConfig(dataset=args.dataset, data_dir=args.data_dir,
                           encoder=args.encoder, layer_tap=args.layer_tap,
                           out_path=args.out, batch_size=args.batch_size,
                           seed=args.seed)
        manifest = export_embeddings(cfg)
    except (DatasetError, EncoderError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {args.out}: {manifest['count']} rows, "
          f"dim {manifest['dim']}, encoder {manifest['encoder']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
