"""Answer one segmenter exchange request from an exchange directory.

The counting engine invokes the configured command with the exchange
directory appended, having written patch.ocpt (float32, (H, W, 3)) and
points.json (a JSON array of {y, x, score} prompts). The responder
writes one uint8 (H, W) mask file per produced mask, named
mask_000.ocpt onward, and finally done.json {"n_masks": N}. done.json
is written last so a crashed responder never presents a torn response.
"""

import glob
import json
import os

import numpy as np

from . import models
from .errors import ExchangeViolation
from .tensorio import read_tensor, write_tensor


def _load_request(exchange_dir):
    patch_path = os.path.join(exchange_dir, "patch.ocpt")
    points_path = os.path.join(exchange_dir, "points.json")
    try:
        patch = read_tensor(patch_path)
    except (OSError, ValueError) as exc:
        raise ExchangeViolation(f"cannot read {patch_path}: {exc}") from exc
    if patch.ndim != 3 or patch.dtype != np.float32:
        raise ExchangeViolation(
            f"patch must be a float32 rank-3 tensor, got {patch.dtype} rank {patch.ndim}"
        )
    try:
        with open(points_path, "r", encoding="utf-8") as fh:
            points = json.load(fh)
    except OSError as exc:
        raise ExchangeViolation(f"cannot read {points_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ExchangeViolation(f"points.json is not valid JSON: {exc}") from exc
    if not isinstance(points, list):
        raise ExchangeViolation(f"points.json must hold a JSON array, got {type(points).__name__}")
    for i, p in enumerate(points):
        if not isinstance(p, dict):
            raise ExchangeViolation(f"points[{i}] must be an object")
        for key in ("y", "x"):
            if not isinstance(p.get(key), (int, float)):
                raise ExchangeViolation(f"points[{i}].{key} must be a number")
    return patch, points


def _clear_responses(exchange_dir):
    for path in glob.glob(os.path.join(exchange_dir, "mask_*.ocpt")):
        os.remove(path)
    done = os.path.join(exchange_dir, "done.json")
    if os.path.exists(done):
        os.remove(done)


def serve_segmenter(exchange_dir, model: str = "stub") -> int:
    """Serve one request/response cycle; returns the mask count written."""
    patch, points = _load_request(exchange_dir)
    segmenter = models.promptable_model(model)
    masks = segmenter(patch, points)
    if len(masks) > len(points):
        raise ExchangeViolation(
            f"model produced {len(masks)} masks for {len(points)} prompts"
        )

    _clear_responses(exchange_dir)
    hw = patch.shape[:2]
    for i, mask in enumerate(masks):
        mask = np.asarray(mask, dtype=np.uint8)
        if mask.shape != hw:
            raise ExchangeViolation(f"mask {i} shape {mask.shape} != patch {hw}")
        write_tensor(os.path.join(exchange_dir, f"mask_{i:03d}.ocpt"), mask)
    with open(os.path.join(exchange_dir, "done.json"), "w", encoding="utf-8") as fh:
        json.dump({"n_masks": len(masks)}, fh)
    return len(masks)
