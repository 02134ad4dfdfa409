"""Per-image prior bundle and its JSON manifest loader.

A manifest is a JSON object with tensor paths relative to the manifest
file itself:

    {
      "image_id": "scene_0001",
      "image_dims": [H, W],
      "classes": [
        {"label": "apple", "mask": "apple_mask.ocpt",
         "activation": "apple_act.ocpt"}
      ],
      "depth": "depth.ocpt",
      "rgb": "rgb.ocpt",              // optional
      "downsample_factor": 16,        // optional
      "channel_dim": 256              // optional
    }

``activation`` is optional per class; when present it must be a float32
grid of shape (ceil(H/K), ceil(W/K)) for downsample factor K.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DepthOutOfRange,
    DimMismatch,
    DuplicateLabel,
    IoFailure,
    ManifestError,
    MaskNotBinary,
    MissingField,
)
from .grids import Grid2D, Grid3D, read_tensor_file

DEFAULT_DOWNSAMPLE = 16
DEFAULT_CHANNEL_DIM = 256


def activation_dims(image_dims: tuple[int, int], factor: int) -> tuple[int, int]:
    return (math.ceil(image_dims[0] / factor), math.ceil(image_dims[1] / factor))


@dataclass(frozen=True)
class PriorBundle:
    """Everything the counting engine consumes for one image."""

    image_id: str
    image_dims: tuple[int, int]
    class_labels: tuple[str, ...]
    semantic_masks: tuple[Grid2D, ...]
    depth: Grid2D
    activations: tuple[Grid2D | None, ...] = ()
    rgb: Grid3D | None = None
    downsample_factor: int = DEFAULT_DOWNSAMPLE
    channel_dim: int = DEFAULT_CHANNEL_DIM

    def __post_init__(self):
        if not self.image_id:
            raise MissingField("image_id must be a non-empty string")
        h, w = self.image_dims
        if h < 1 or w < 1:
            raise ManifestError(f"image_dims must be positive, got {self.image_dims}")
        if len(set(self.class_labels)) != len(self.class_labels):
            raise DuplicateLabel(f"duplicate class labels in {list(self.class_labels)}")
        if any(not lbl for lbl in self.class_labels):
            raise MissingField("class labels must be non-empty strings")
        if len(self.semantic_masks) != len(self.class_labels):
            raise ManifestError("one semantic mask required per class label")
        acts = self.activations
        if not acts:
            acts = tuple(None for _ in self.class_labels)
            object.__setattr__(self, "activations", acts)
        if len(acts) != len(self.class_labels):
            raise ManifestError("activations, when given, must align with class_labels")
        if self.downsample_factor < 1:
            raise ManifestError(f"downsample_factor must be >= 1, got {self.downsample_factor}")
        if self.channel_dim < 1:
            raise ManifestError(f"channel_dim must be >= 1, got {self.channel_dim}")

        for lbl, mask in zip(self.class_labels, self.semantic_masks):
            if mask.data.dtype != np.uint8:
                raise MaskNotBinary(f"semantic mask for {lbl!r} must be uint8")
            if mask.dims != self.image_dims:
                raise DimMismatch(
                    f"mask for {lbl!r} has dims {mask.dims}, image_dims {self.image_dims}"
                )
            if mask.data.max(initial=0) > 1:
                raise MaskNotBinary(f"semantic mask for {lbl!r} holds values outside {{0,1}}")

        lowres = activation_dims(self.image_dims, self.downsample_factor)
        for lbl, act in zip(self.class_labels, acts):
            if act is None:
                continue
            if act.data.dtype != np.float32:
                raise ManifestError(f"activation for {lbl!r} must be float32")
            if act.dims != lowres:
                raise DimMismatch(
                    f"activation for {lbl!r} has dims {act.dims}, expected {lowres}"
                )

        if self.depth.data.dtype != np.float32:
            raise ManifestError("depth grid must be float32")
        if self.depth.dims != self.image_dims:
            raise DimMismatch(
                f"depth has dims {self.depth.dims}, image_dims {self.image_dims}"
            )
        dmin = float(self.depth.data.min())
        dmax = float(self.depth.data.max())
        if not np.isfinite(self.depth.data).all() or dmin < 0.0 or dmax > 1.0:
            raise DepthOutOfRange(f"depth values span [{dmin}, {dmax}], must be within [0, 1]")

        if self.rgb is not None:
            if self.rgb.dims[:2] != self.image_dims or self.rgb.channels != 3:
                raise DimMismatch(
                    f"rgb has dims {self.rgb.dims}, expected {self.image_dims + (3,)}"
                )

    def class_index(self, label: str) -> int:
        try:
            return self.class_labels.index(label)
        except ValueError:
            raise KeyError(label) from None


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise MissingField(f"{where} is missing required field {key!r}")
    return obj[key]


def _load_grid2d(path, *, what: str) -> Grid2D:
    grid = read_tensor_file(path)
    if not isinstance(grid, Grid2D):
        raise DimMismatch(f"{what} at {path} must be a 2-d grid")
    return grid


def load_prior_bundle(manifest_path) -> PriorBundle:
    """Load and fully validate a bundle from a manifest JSON file.

    Either returns a bundle satisfying every invariant or raises one of
    the typed manifest errors; it never returns a partially valid bundle.
    """
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"manifest {manifest_path} must hold a JSON object")

    base = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(rel):
        if not isinstance(rel, str) or not rel:
            raise ManifestError(f"tensor path must be a non-empty string, got {rel!r}")
        return os.path.join(base, rel)

    image_id = _require(doc, "image_id", "manifest")
    dims_raw = _require(doc, "image_dims", "manifest")
    if (
        not isinstance(dims_raw, (list, tuple))
        or len(dims_raw) != 2
        or not all(isinstance(v, int) for v in dims_raw)
    ):
        raise ManifestError(f"image_dims must be [H, W] integers, got {dims_raw!r}")
    image_dims = (dims_raw[0], dims_raw[1])

    classes = _require(doc, "classes", "manifest")
    if not isinstance(classes, list):
        raise ManifestError("classes must be a JSON array")

    labels: list[str] = []
    masks: list[Grid2D] = []
    acts: list[Grid2D | None] = []
    for i, entry in enumerate(classes):
        if not isinstance(entry, dict):
            raise ManifestError(f"classes[{i}] must be an object")
        where = f"classes[{i}]"
        labels.append(_require(entry, "label", where))
        masks.append(_load_grid2d(resolve(_require(entry, "mask", where)), what=f"{where} mask"))
        if entry.get("activation") is not None:
            acts.append(
                _load_grid2d(resolve(entry["activation"]), what=f"{where} activation")
            )
        else:
            acts.append(None)

    depth = _load_grid2d(resolve(_require(doc, "depth", "manifest")), what="depth")

    rgb = None
    if doc.get("rgb") is not None:
        rgb_grid = read_tensor_file(resolve(doc["rgb"]))
        if not isinstance(rgb_grid, Grid3D):
            raise DimMismatch(f"rgb at {doc['rgb']} must be a 3-d grid")
        rgb = rgb_grid

    return PriorBundle(
        image_id=str(image_id),
        image_dims=image_dims,
        class_labels=tuple(str(l) for l in labels),
        semantic_masks=tuple(masks),
        depth=depth,
        activations=tuple(acts),
        rgb=rgb,
        downsample_factor=int(doc.get("downsample_factor", DEFAULT_DOWNSAMPLE)),
        channel_dim=int(doc.get("channel_dim", DEFAULT_CHANNEL_DIM)),
    )
