"""Command line front end.

Exit codes: 0 success, 1 configuration error, 2 I/O error, missing
ground truth, or dimension mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import metrics as metrics_mod
from .bundle import load_prior_bundle
from .errors import (
    AnnotationError,
    DimMismatch,
    IoFailure,
    ManifestError,
    MissingGroundTruth,
    PriorCountError,
    TensorFormatError,
    UnknownLabel,
    UnsupportedConfig,
)
from .grids import write_tensor_file
from .pipeline import (
    ClassCount,
    CountRequest,
    CountResult,
    StageToggles,
    count_image,
    result_to_dict,
)
from .refine import RefineParams, refine_masks
from .refpoints import PointParams, RefPoint, select_reference_points
from .segment import ExternalBackend, ReferenceBackend, SegmentParams
from .viz import render_overlay, save_png

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2

_IO_ERRORS = (
    IoFailure,
    ManifestError,
    TensorFormatError,
    DimMismatch,
    AnnotationError,
    MissingGroundTruth,
)
_CONFIG_ERRORS = (UnknownLabel, UnsupportedConfig, ValueError)


def _add_refine_flags(p: argparse.ArgumentParser):
    p.add_argument("--tau", type=float, default=0.3,
                   help="depth tolerance for mask recovery (default 0.3)")
    p.add_argument("--window", type=int, default=10,
                   help="Chebyshev window radius for mask recovery (default 10)")


def _add_point_flags(p: argparse.ArgumentParser):
    p.add_argument("--sigma", type=float, default=0.4,
                   help="Gaussian smoothing sigma for sub-pixel peaks (default 0.4)")
    p.add_argument("--omega", type=int, default=4,
                   help="kernel size parameter; kernel side is 2*floor(omega/2)+1 (default 4)")


def _add_count_flags(p: argparse.ArgumentParser):
    p.add_argument("-m", "--manifest", required=True,
                   help="bundle manifest JSON, or a directory of *.json manifests")
    p.add_argument("--labels", default=None,
                   help="comma-separated class labels (default: every bundle class)")
    p.add_argument("--backend", choices=("reference", "external"), default="reference",
                   help="segmentation backend (default reference)")
    _add_refine_flags(p)
    _add_point_flags(p)
    p.add_argument("--min-area", type=int, default=20,
                   help="minimum instance area in pixels (default 20)")
    p.add_argument("--no-gp", action="store_true",
                   help="disable depth-guided mask recovery")
    p.add_argument("--no-rp", action="store_true",
                   help="replace reference points with a uniform grid of prompts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priorcount",
        description="Count object instances per class from precomputed priors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_count = sub.add_parser("count", help="count instances for one or many images")
    _add_count_flags(p_count)
    p_count.add_argument("--jobs", type=int, default=1,
                         help="worker threads for batch counting (default 1)")
    p_count.add_argument("--out", default=None,
                         help="output JSONL path (default stdout)")

    p_eval = sub.add_parser("eval", help="score predictions against annotations")
    p_eval.add_argument("--pred", required=True, help="predictions JSONL from 'count'")
    p_eval.add_argument("--annotations", required=True, help="ground-truth JSONL")
    p_eval.add_argument("--out", default=None, help="write the report as JSON here")

    p_viz = sub.add_parser("viz", help="render a PNG overlay for one image")
    _add_count_flags(p_viz)
    p_viz.add_argument("--result", required=True, help="predictions JSONL from 'count'")
    p_viz.add_argument("--out", required=True, help="output PNG path")

    p_refine = sub.add_parser("refine", help="write refined masks for one image")
    p_refine.add_argument("-m", "--manifest", required=True, help="bundle manifest JSON")
    _add_refine_flags(p_refine)
    p_refine.add_argument("--out", required=True, help="output directory for refined tensors")

    p_points = sub.add_parser("points", help="emit reference points for one image")
    p_points.add_argument("-m", "--manifest", required=True, help="bundle manifest JSON")
    p_points.add_argument("--labels", default=None,
                          help="comma-separated class labels (default: every bundle class)")
    _add_refine_flags(p_points)
    _add_point_flags(p_points)
    p_points.add_argument("--out", default=None, help="output JSON path (default stdout)")

    p_split = sub.add_parser("split", help="generate a dataset split from annotations")
    p_split.add_argument("--annotations", required=True, help="ground-truth JSONL")
    p_split.add_argument("--mode", choices=("zero-shot", "few-shot"), default="zero-shot",
                         help="split flavor (default zero-shot)")
    p_split.add_argument("--ratio", type=float, default=0.6,
                         help="train fraction of classes for zero-shot (default 0.6)")
    p_split.add_argument("--shots", type=int, default=1,
                         help="train images per class for few-shot (default 1)")
    p_split.add_argument("--seed", type=int, default=0, help="shuffle seed (default 0)")
    p_split.add_argument("--excluded-domains", default=None,
                         help="comma-separated domains forced into the test side")
    p_split.add_argument("--out", default=None, help="output JSON path (default stdout)")

    return parser


def _manifest_paths(arg: str) -> list[str]:
    if os.path.isdir(arg):
        paths = [
            os.path.join(arg, name)
            for name in sorted(os.listdir(arg))
            if name.endswith(".json")
        ]
        if not paths:
            raise IoFailure(f"no *.json manifests under {arg}")
        return paths
    if not os.path.exists(arg):
        raise IoFailure(f"manifest {arg} does not exist")
    return [arg]


def _parse_labels(arg: str | None) -> list[str] | None:
    if arg is None:
        return None
    labels = [s.strip() for s in arg.split(",") if s.strip()]
    if not labels:
        raise UnknownLabel("--labels is empty")
    return labels


def _params_from_args(args) -> tuple[RefineParams, PointParams, SegmentParams]:
    refine_p = RefineParams(tau=args.tau, window_radius=args.window)
    point_p = PointParams(sigma=args.sigma, omega=args.omega)
    seg_p = SegmentParams(min_area=args.min_area)
    return refine_p, point_p, seg_p


def _make_backend(name: str):
    if name == "external":
        import tempfile

        return ExternalBackend(tempfile.mkdtemp(prefix="seg_exchange_"))
    return ReferenceBackend()


def _count_one(path: str, args, refine_p, point_p, seg_p, backend, toggles) -> CountResult:
    bundle = load_prior_bundle(path)
    labels = _parse_labels(args.labels) or list(bundle.class_labels)
    request = CountRequest(image_id=bundle.image_id, labels=tuple(labels))
    return count_image(
        bundle,
        request,
        refine_params=refine_p,
        point_params=point_p,
        seg_params=seg_p,
        backend=backend,
        toggles=toggles,
    )


def _emit(text: str, out_path: str | None):
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    try:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {out_path}: {exc}") from exc


def cmd_count(args) -> int:
    paths = _manifest_paths(args.manifest)
    refine_p, point_p, seg_p = _params_from_args(args)
    toggles = StageToggles(use_geometric=not args.no_gp, use_refpoints=not args.no_rp)
    backend = _make_backend(args.backend)
    jobs = max(1, args.jobs)
    if jobs == 1 or len(paths) == 1:
        results = [_count_one(p, args, refine_p, point_p, seg_p, backend, toggles) for p in paths]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    lambda p: _count_one(p, args, refine_p, point_p, seg_p, backend, toggles),
                    paths,
                )
            )
    results.sort(key=lambda r: r.image_id)
    lines = [json.dumps(result_to_dict(r), sort_keys=True) for r in results]
    _emit("\n".join(lines), args.out)
    return EXIT_OK


def _read_pred_jsonl(path: str) -> list[CountResult]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoFailure(f"cannot read predictions {path}: {exc}") from exc
    results = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            classes = []
            for c in doc["classes"]:
                if "error" in c:
                    classes.append(ClassCount(label=c["label"], count=None, error=c["error"]))
                else:
                    classes.append(
                        ClassCount(
                            label=c["label"],
                            count=int(c["count"]),
                            n_reference_points=int(c.get("n_reference_points", 0)),
                            n_masks_prefilter=int(c.get("n_masks_prefilter", 0)),
                            points=[RefPoint(*p) for p in c.get("points", [])],
                        )
                    )
            results.append(
                CountResult(image_id=str(doc["image_id"]), classes=classes, timings_ms={})
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationError(f"{path}:{lineno}: malformed prediction line: {exc}") from exc
    return results


def cmd_eval(args) -> int:
    results = _read_pred_jsonl(args.pred)
    records = metrics_mod.read_annotations(args.annotations)
    report = metrics_mod.evaluate(results, records)
    print(metrics_mod.format_report(report))
    if args.out is not None:
        _emit(json.dumps(report, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def cmd_viz(args) -> int:
    bundle = load_prior_bundle(args.manifest)
    results = _read_pred_jsonl(args.result)
    match = [r for r in results if r.image_id == bundle.image_id]
    if not match:
        raise UnknownLabel(
            f"result file {args.result} has no entry for image {bundle.image_id!r}"
        )
    result = match[0]
    labels = [c.label for c in result.classes if c.error is None]

    refined_by_label = {}
    points_by_label = {}
    instances_by_label = {}
    if labels:
        refine_p, point_p, seg_p = _params_from_args(args)
        toggles = StageToggles(use_geometric=not args.no_gp, use_refpoints=not args.no_rp)
        backend = _make_backend(args.backend)
        request = CountRequest(image_id=bundle.image_id, labels=tuple(labels))
        fresh = count_image(
            bundle,
            request,
            refine_params=refine_p,
            point_params=point_p,
            seg_params=seg_p,
            backend=backend,
            toggles=toggles,
        )
        if toggles.use_geometric:
            refined = refine_masks(bundle, refine_p)
        else:
            refined = None
        for entry in fresh.classes:
            if entry.error is not None:
                continue
            idx = bundle.class_index(entry.label)
            if refined is not None:
                refined_by_label[entry.label] = refined.refined_masks[idx]
            else:
                refined_by_label[entry.label] = bundle.semantic_masks[idx]
            points_by_label[entry.label] = entry.points
            if entry.mask_set is not None:
                instances_by_label[entry.label] = [
                    entry.mask_set.masks[i] for i in entry.mask_set.filtered
                ]
    canvas = render_overlay(bundle, refined_by_label, points_by_label, instances_by_label)
    save_png(args.out, canvas)
    return EXIT_OK


def cmd_refine(args) -> int:
    bundle = load_prior_bundle(args.manifest)
    refined = refine_masks(bundle, RefineParams(tau=args.tau, window_radius=args.window))
    os.makedirs(args.out, exist_ok=True)
    summary = {"image_id": bundle.image_id, "classes": []}
    for label, grid, mu, added in zip(
        bundle.class_labels,
        refined.refined_masks,
        refined.mean_depths,
        refined.added_pixel_count,
    ):
        name = f"refined_{len(summary['classes']):03d}.ocpt"
        write_tensor_file(os.path.join(args.out, name), grid)
        summary["classes"].append(
            {
                "label": label,
                "mask": name,
                "mean_depth": None if mu != mu else round(mu, 6),
                "added_pixels": added,
            }
        )
    _emit(json.dumps(summary, indent=2, sort_keys=True), os.path.join(args.out, "refined.json"))
    return EXIT_OK


def cmd_points(args) -> int:
    bundle = load_prior_bundle(args.manifest)
    labels = _parse_labels(args.labels) or list(bundle.class_labels)
    for label in labels:
        if label not in bundle.class_labels:
            raise UnknownLabel(f"label {label!r} not among bundle classes")
    refined = refine_masks(bundle, RefineParams(tau=args.tau, window_radius=args.window))
    by_label = select_reference_points(
        bundle, refined, PointParams(sigma=args.sigma, omega=args.omega)
    )
    payload = [
        {"class": label, "y": p.y, "x": p.x, "score": p.score}
        for label in labels
        for p in by_label[label]
    ]
    _emit(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def cmd_split(args) -> int:
    records = metrics_mod.read_annotations(args.annotations)
    if args.mode == "zero-shot":
        excluded = tuple(
            s.strip() for s in (args.excluded_domains or "").split(",") if s.strip()
        )
        train, test = metrics_mod.generate_zero_shot_split(
            records, ratio=args.ratio, seed=args.seed, excluded_domains=excluded
        )
        payload = {"mode": "zero-shot", "seed": args.seed, "train_classes": train,
                   "test_classes": test}
    else:
        train_by_class, test = metrics_mod.generate_few_shot_split(
            records, shots=args.shots, seed=args.seed
        )
        payload = {"mode": "few-shot", "seed": args.seed, "shots": args.shots,
                   "train_images_by_class": train_by_class, "test_images": test}
    _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    return EXIT_OK


_DISPATCH = {
    "count": cmd_count,
    "eval": cmd_eval,
    "viz": cmd_viz,
    "refine": cmd_refine,
    "points": cmd_points,
    "split": cmd_split,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PriorCountError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
