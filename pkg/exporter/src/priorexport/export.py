"""Run prior models on one image and emit tensors plus a manifest."""

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import models
from .errors import ImageDecodeFailure
from .tensorio import write_tensor

DEFAULT_DOWNSAMPLE = 16
DEFAULT_CHANNEL_DIM = 256


@dataclass(frozen=True)
class ExportJob:
    image_path: str
    class_labels: tuple[str, ...]
    out_dir: str
    semantic: str = "stub"
    depth: str = "stub"
    downsample_factor: int = DEFAULT_DOWNSAMPLE

    def __post_init__(self):
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        if not self.class_labels:
            raise ValueError("class_labels must be non-empty")
        if any(not isinstance(l, str) or not l for l in self.class_labels):
            raise ValueError("class labels must be non-empty strings")
        if len(set(self.class_labels)) != len(self.class_labels):
            raise ValueError("class labels must be unique")
        if self.downsample_factor < 1:
            raise ValueError(f"downsample_factor must be >= 1, got {self.downsample_factor}")


def decode_image(path) -> np.ndarray:
    """Decode to float32 RGB in [0, 1], shape (H, W, 3)."""
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise ImageDecodeFailure(f"cannot decode {path}: {exc}") from exc
    return rgb


def normalize_depth(raw: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant map becomes all 0.5."""
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = float(raw.min()), float(raw.max())
    if hi == lo:
        return np.full(raw.shape, 0.5, dtype=np.float32)
    return ((raw - lo) / (hi - lo)).astype(np.float32)


def _check_model_output(masks, activations, dims, n_classes, factor):
    low = (math.ceil(dims[0] / factor), math.ceil(dims[1] / factor))
    if len(masks) != n_classes or len(activations) != n_classes:
        raise ValueError(
            f"semantic model returned {len(masks)} masks / {len(activations)} "
            f"activations for {n_classes} classes"
        )
    for i, (mask, act) in enumerate(zip(masks, activations)):
        if mask.shape != dims or mask.dtype != np.uint8:
            raise ValueError(f"class {i} mask must be uint8 {dims}, got {mask.dtype} {mask.shape}")
        if not np.isin(mask, (0, 1)).all():
            raise ValueError(f"class {i} mask holds values outside {{0, 1}}")
        if act.shape != low or act.dtype != np.float32:
            raise ValueError(
                f"class {i} activation must be float32 {low}, got {act.dtype} {act.shape}"
            )


def export_priors(job: ExportJob) -> str:
    """Run the configured models and write the bundle; returns the manifest path."""
    rgb = decode_image(job.image_path)
    dims = rgb.shape[:2]

    semantic = models.semantic_model(job.semantic)
    depth_model = models.depth_model(job.depth)
    masks, activations = semantic(rgb, job.class_labels, job.downsample_factor)
    masks = [np.asarray(m) for m in masks]
    activations = [np.asarray(a) for a in activations]
    _check_model_output(masks, activations, dims, len(job.class_labels), job.downsample_factor)

    depth = normalize_depth(depth_model(rgb))
    if depth.shape != dims:
        raise ValueError(f"depth model output {depth.shape} does not match image {dims}")

    os.makedirs(job.out_dir, exist_ok=True)
    classes = []
    for i, label in enumerate(job.class_labels):
        mask_name = f"mask_{i:02d}.ocpt"
        act_name = f"act_{i:02d}.ocpt"
        write_tensor(os.path.join(job.out_dir, mask_name), masks[i])
        write_tensor(os.path.join(job.out_dir, act_name), activations[i])
        classes.append({"label": label, "mask": mask_name, "activation": act_name})
    write_tensor(os.path.join(job.out_dir, "depth.ocpt"), depth)
    write_tensor(os.path.join(job.out_dir, "rgb.ocpt"), rgb.astype(np.float32))

    image_id = os.path.splitext(os.path.basename(str(job.image_path)))[0]
    doc = {
        "image_id": image_id,
        "image_dims": [int(dims[0]), int(dims[1])],
        "classes": classes,
        "depth": "depth.ocpt",
        "rgb": "rgb.ocpt",
        "downsample_factor": job.downsample_factor,
        "channel_dim": DEFAULT_CHANNEL_DIM,
    }
    manifest = os.path.join(job.out_dir, "manifest.json")
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return manifest
