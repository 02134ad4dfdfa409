"""Single-image counting pipeline: refine, prompt, segment, filter.

Mask refinement runs once per image over every bundle class; prompts,
segmentation, and filtering then run per requested class. A failure in
one class is recorded on that class's entry and never aborts the rest
of the image.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field

from .bundle import PriorBundle
from .errors import (
    DegenerateBox,
    MissingActivation,
    PriorCountError,
    UnknownLabel,
    UnsupportedConfig,
)
from .grids import Grid2D
from .refine import RefinedPriors, RefineParams, _mean_or_none, refine_masks
from .refpoints import (
    PointParams,
    RefPoint,
    find_local_maxima,
    gate_points,
    gaussian_refine,
    upscale_points,
)
from .segment import (
    InstanceMaskSet,
    ReferenceBackend,
    SegmenterBackend,
    SegmentParams,
    count,
    extract_rgb_patch,
    filter_masks,
)

PROMPT_MODES = ("auto", "points", "boxes")


@dataclass(frozen=True)
class StageToggles:
    use_semantic: bool = True
    use_geometric: bool = True
    use_refpoints: bool = True


@dataclass(frozen=True)
class CountRequest:
    image_id: str
    labels: tuple[str, ...]
    prompt_mode: str = "auto"
    manual_points: dict[str, list[tuple[float, float]]] | None = None
    manual_boxes: dict[str, list[tuple[float, float, float, float]]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.prompt_mode not in PROMPT_MODES:
            raise ValueError(f"prompt_mode must be one of {PROMPT_MODES}, got {self.prompt_mode!r}")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("request labels must be unique")
        has_pts = self.manual_points is not None
        has_box = self.manual_boxes is not None
        if self.prompt_mode == "auto" and (has_pts or has_box):
            raise ValueError("manual prompts are only allowed when prompt_mode != 'auto'")
        if self.prompt_mode == "points" and not has_pts:
            raise ValueError("prompt_mode 'points' requires manual_points")
        if self.prompt_mode == "boxes" and not has_box:
            raise ValueError("prompt_mode 'boxes' requires manual_boxes")


@dataclass
class ClassCount:
    label: str
    count: int | None
    n_reference_points: int = 0
    n_masks_prefilter: int = 0
    points: list[RefPoint] = field(default_factory=list)
    mask_set: InstanceMaskSet | None = None
    error: str | None = None


@dataclass
class CountResult:
    image_id: str
    classes: list[ClassCount]
    timings_ms: dict[str, float]


def boxes_to_points(boxes) -> list[RefPoint]:
    """Box centroids as prompts with score 1.0.

    Boxes are (y0, x0, y1, x1) and must satisfy y0 < y1 and x0 < x1,
    otherwise DegenerateBox is raised.
    """
    pts = []
    for box in boxes:
        y0, x0, y1, x1 = (float(v) for v in box)
        if not (y0 < y1 and x0 < x1):
            raise DegenerateBox(f"box {box!r} has no interior")
        pts.append(RefPoint((y0 + y1) / 2.0, (x0 + x1) / 2.0, 1.0))
    return pts


def uniform_grid_points(mask: Grid2D, stride: int) -> list[RefPoint]:
    """Grid prompts over the mask at the given stride, row-major."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    h, w = mask.dims
    data = mask.data
    pts = []
    for y in range(stride // 2, h, stride):
        for x in range(stride // 2, w, stride):
            if data[y, x] == 1:
                pts.append(RefPoint(float(y), float(x), 1.0))
    return pts


def _passthrough_refined(bundle: PriorBundle) -> RefinedPriors:
    means = []
    for m in bundle.semantic_masks:
        mu = _mean_or_none(m.data, bundle.depth.data)
        means.append(float("nan") if mu is None else float(mu))
    return RefinedPriors(
        refined_masks=tuple(bundle.semantic_masks),
        mean_depths=tuple(means),
        added_pixel_count=tuple(0 for _ in bundle.semantic_masks),
    )


def _auto_points(
    bundle: PriorBundle,
    class_idx: int,
    refined_mask: Grid2D,
    point_params: PointParams,
) -> list[RefPoint]:
    act = bundle.activations[class_idx]
    if act is None:
        raise MissingActivation(
            f"class {bundle.class_labels[class_idx]!r} has no activation map"
        )
    peaks = find_local_maxima(act, point_params.score_threshold)
    refined_pts = gaussian_refine(act, peaks, point_params)
    full = upscale_points(refined_pts, bundle.downsample_factor, bundle.image_dims)
    return gate_points(full, refined_mask)


def count_image(
    bundle: PriorBundle,
    request: CountRequest,
    refine_params: RefineParams | None = None,
    point_params: PointParams | None = None,
    seg_params: SegmentParams | None = None,
    backend: SegmenterBackend | None = None,
    toggles: StageToggles | None = None,
) -> CountResult:
    """Count every requested class in one image; see the module docstring."""
    if refine_params is None:
        refine_params = RefineParams()
    if point_params is None:
        point_params = PointParams()
    if seg_params is None:
        seg_params = SegmentParams()
    if backend is None:
        backend = ReferenceBackend()
    if toggles is None:
        toggles = StageToggles()
    if not toggles.use_semantic:
        raise UnsupportedConfig("the semantic prior cannot be disabled")

    if not request.labels:
        raise UnknownLabel("request carries no labels")
    for label in request.labels:
        if label not in bundle.class_labels:
            raise UnknownLabel(f"label {label!r} not among bundle classes {list(bundle.class_labels)}")

    timings: dict[str, float] = {}
    t_total = time.perf_counter()

    t0 = time.perf_counter()
    if toggles.use_geometric:
        refined = refine_masks(bundle, refine_params)
    else:
        refined = _passthrough_refined(bundle)
    timings["refine_ms"] = (time.perf_counter() - t0) * 1000.0

    points_ms = 0.0
    segment_ms = 0.0
    entries: list[ClassCount] = []
    for label in request.labels:
        idx = bundle.class_index(label)
        refined_mask = refined.refined_masks[idx]
        try:
            t0 = time.perf_counter()
            if request.prompt_mode == "points":
                raw = (request.manual_points or {}).get(label)
                if raw is None:
                    raise UnknownLabel(f"no manual points supplied for {label!r}")
                pts = [RefPoint(float(y), float(x), 1.0) for y, x in raw]
            elif request.prompt_mode == "boxes":
                raw = (request.manual_boxes or {}).get(label)
                if raw is None:
                    raise UnknownLabel(f"no manual boxes supplied for {label!r}")
                pts = boxes_to_points(raw)
            elif toggles.use_refpoints:
                pts = _auto_points(bundle, idx, refined_mask, point_params)
            else:
                pts = uniform_grid_points(refined_mask, bundle.downsample_factor)
            points_ms += (time.perf_counter() - t0) * 1000.0

            t0 = time.perf_counter()
            patch = None
            if backend.accepts_rgb and bundle.rgb is not None:
                patch = extract_rgb_patch(bundle.rgb, refined_mask)
            seg = backend.segment(
                label,
                refined_mask,
                pts,
                seg_params,
                depth=bundle.depth if backend.accepts_depth else None,
                rgb_patch=patch,
            )
            seg = filter_masks(seg, seg_params)
            segment_ms += (time.perf_counter() - t0) * 1000.0

            entries.append(
                ClassCount(
                    label=label,
                    count=count(seg),
                    n_reference_points=len(pts),
                    n_masks_prefilter=len(seg.masks),
                    points=pts,
                    mask_set=seg,
                )
            )
        except PriorCountError as exc:
            entries.append(
                ClassCount(
                    label=label,
                    count=None,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )

    timings["points_ms"] = points_ms
    timings["segment_ms"] = segment_ms
    timings["total_ms"] = (time.perf_counter() - t_total) * 1000.0
    return CountResult(image_id=request.image_id, classes=entries, timings_ms=timings)


def toggle_stages(toggles: StageToggles):
    """Bind stage toggles into a count_image variant.

    Disabling the semantic prior is rejected here because the pipeline
    has no source of candidate pixels without it.
    """
    if not toggles.use_semantic:
        raise UnsupportedConfig("the semantic prior cannot be disabled")
    return functools.partial(count_image, toggles=toggles)


def result_to_dict(result: CountResult) -> dict:
    """JSON-ready view of a CountResult (masks are not serialized)."""
    classes = []
    for c in result.classes:
        if c.error is not None:
            classes.append({"label": c.label, "error": c.error})
            continue
        classes.append(
            {
                "label": c.label,
                "count": c.count,
                "n_reference_points": c.n_reference_points,
                "n_masks_prefilter": c.n_masks_prefilter,
                "points": [[p.y, p.x, p.score] for p in c.points],
            }
        )
    return {
        "image_id": result.image_id,
        "classes": classes,
        "timings_ms": {k: round(v, 3) for k, v in result.timings_ms.items()},
    }
