"""PNG overlays of refined masks, reference points, and instance outlines."""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import ndimage

from .bundle import PriorBundle
from .errors import IoFailure
from .grids import Grid2D
from .refpoints import RefPoint, round_pixel

PALETTE = (
    (230, 70, 70),
    (70, 150, 230),
    (90, 200, 90),
    (240, 180, 50),
    (180, 90, 220),
    (90, 210, 200),
    (240, 120, 200),
    (150, 150, 90),
)


def class_color(index: int) -> tuple[int, int, int]:
    return PALETTE[index % len(PALETTE)]


def base_image(bundle: PriorBundle) -> np.ndarray:
    """uint8 (H, W, 3) canvas: the rgb prior, or depth as grayscale."""
    if bundle.rgb is not None:
        arr = np.clip(bundle.rgb.data, 0.0, 1.0)
        return np.round(arr * 255.0).astype(np.uint8)
    g = np.round(np.clip(bundle.depth.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    return np.stack([g, g, g], axis=-1)


def _boundary(mask: np.ndarray) -> np.ndarray:
    inner = ndimage.binary_erosion(mask, structure=np.ones((3, 3), dtype=bool))
    return mask & ~inner


def render_overlay(
    bundle: PriorBundle,
    refined_by_label: dict[str, Grid2D] | None = None,
    points_by_label: dict[str, list[RefPoint]] | None = None,
    instances_by_label: dict[str, list[Grid2D]] | None = None,
) -> np.ndarray:
    """Compose the overlay; with no overlays the base image passes through."""
    canvas = base_image(bundle).astype(np.int32)
    h, w = bundle.image_dims
    order = {label: i for i, label in enumerate(bundle.class_labels)}

    for label, grid in (refined_by_label or {}).items():
        color = np.array(class_color(order.get(label, 0)), dtype=np.int32)
        mask = grid.data > 0
        canvas[mask] = (canvas[mask] * 3 + color * 1) // 4
        edge = _boundary(mask)
        canvas[edge] = color

    for label, grids in (instances_by_label or {}).items():
        color = np.array(class_color(order.get(label, 0)), dtype=np.int32)
        bright = np.minimum(color + 80, 255)
        for grid in grids:
            edge = _boundary(grid.data > 0)
            canvas[edge] = bright

    for label, points in (points_by_label or {}).items():
        for p in points:
            cy, cx = round_pixel(p.y), round_pixel(p.x)
            for dy, dx in ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-2, 0), (2, 0), (0, -2), (0, 2)):
                y, x = cy + dy, cx + dx
                if 0 <= y < h and 0 <= x < w:
                    canvas[y, x] = (255, 255, 255)

    return canvas.astype(np.uint8)


def save_png(path, array: np.ndarray) -> None:
    try:
        Image.fromarray(array, mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
