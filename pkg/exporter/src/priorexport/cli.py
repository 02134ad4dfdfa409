"""Command line front end: export, serve-seg, convert."""

import argparse
import sys

from .convert import FORMATS, convert_annotations, write_jsonl
from .errors import ExporterError
from .export import DEFAULT_DOWNSAMPLE, ExportJob, export_priors
from .serve import serve_segmenter

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


def _split_labels(raw: str) -> list[str]:
    labels = [part.strip() for part in raw.split(",")]
    return [l for l in labels if l]


def _cmd_export(args) -> int:
    job = ExportJob(
        image_path=args.image,
        class_labels=tuple(_split_labels(args.classes)),
        out_dir=args.out,
        semantic=args.semantic,
        depth=args.depth,
        downsample_factor=args.factor,
    )
    manifest = export_priors(job)
    print(manifest)
    return EXIT_OK


def _cmd_serve_seg(args) -> int:
    exchange_dir = args.dir_positional or args.dir
    if not exchange_dir:
        raise ValueError("serve-seg needs an exchange directory (positional or --dir)")
    serve_segmenter(exchange_dir, model=args.model)
    return EXIT_OK


def _cmd_convert(args) -> int:
    records = convert_annotations(args.format, args.source)
    write_jsonl(records, args.out)
    print(args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priorexport",
        description="Produce counting priors and evaluation annotations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="run prior models on one image")
    p.add_argument("--image", required=True, help="input image path")
    p.add_argument("--classes", required=True, help="comma-separated class labels")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--semantic", default="stub", help="semantic model name")
    p.add_argument("--depth", default="stub", help="depth model name")
    p.add_argument("--factor", type=int, default=DEFAULT_DOWNSAMPLE, help="activation downsample factor")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("serve-seg", help="answer one segmenter exchange request")
    p.add_argument("dir_positional", nargs="?", default=None, help="exchange directory")
    p.add_argument("--dir", default=None, help="exchange directory")
    p.add_argument("--model", default="stub", help="promptable model name")
    p.set_defaults(func=_cmd_serve_seg)

    p = sub.add_parser("convert", help="convert dataset annotations to JSONL")
    p.add_argument("--format", required=True, choices=FORMATS, help="source annotation style")
    p.add_argument("--in", required=True, dest="source", help="source annotation file")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=_cmd_convert)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ExporterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
