"""Reference point selection on low-resolution activation heatmaps.

Peaks are strict local maxima of the heatmap thresholded on a per-map
min-max normalized score, refined to sub-pixel coordinates via a
log-space Taylor step around each peak, mapped into full-resolution
pixel coordinates, and finally gated by the refined class mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .bundle import PriorBundle
from .errors import MissingActivation
from .grids import Grid2D
from .refine import RefinedPriors

LOG_FLOOR = 1e-8


@dataclass(frozen=True)
class RefPoint:
    y: float
    x: float
    score: float


@dataclass(frozen=True)
class PointParams:
    score_threshold: float = 0.5
    sigma: float = 0.4
    omega: int = 4
    max_offset: float = 0.45

    def __post_init__(self):
        if not (0.0 <= self.score_threshold <= 1.0):
            raise ValueError(f"score_threshold must lie in [0, 1], got {self.score_threshold}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.omega < 2:
            raise ValueError(f"omega must be >= 2, got {self.omega}")
        if not (0.0 < self.max_offset <= 0.5):
            raise ValueError(f"max_offset must lie in (0, 0.5], got {self.max_offset}")

    @property
    def kernel_side(self) -> int:
        return 2 * (self.omega // 2) + 1


def round_pixel(v: float) -> int:
    """Round half up; ties always move toward +inf so results are stable."""
    return int(math.floor(v + 0.5))


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Map values onto [0, 1]; a constant map normalizes to all zeros."""
    v = values.astype(np.float64)
    lo = float(v.min())
    hi = float(v.max())
    if hi <= lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def find_local_maxima(heatmap: Grid2D, score_threshold: float = 0.5) -> list[RefPoint]:
    """Strict 8-neighbor local maxima with normalized score >= threshold.

    Plateau cells (equal to a neighbor) never qualify. Points come back
    in row-major order with the normalized score attached.
    """
    h, w = heatmap.dims
    if h < 3 or w < 3:
        raise ValueError(f"heatmap must be at least 3x3, got {heatmap.dims}")
    raw = heatmap.data.astype(np.float64)
    norm = minmax_normalize(heatmap.data)
    padded = np.pad(raw, 1, mode="constant", constant_values=-np.inf)
    center = padded[1:-1, 1:-1]
    strict = np.ones((h, w), dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            strict &= center > padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    strict &= norm >= score_threshold
    return [
        RefPoint(y=float(r), x=float(c), score=float(norm[r, c]))
        for r, c in np.argwhere(strict)
    ]


def _gaussian_kernel(sigma: float, side: int) -> np.ndarray:
    c = (side - 1) / 2.0
    ax = np.arange(side, dtype=np.float64) - c
    g1 = np.exp(-(ax**2) / (2.0 * sigma * sigma))
    k = np.outer(g1, g1)
    return k / k.sum()


def gaussian_refine(
    heatmap: Grid2D, peaks: list[RefPoint], params: PointParams | None = None
) -> list[RefPoint]:
    """Shift integer peaks by a log-space Taylor step, one per peak.

    The heatmap is smoothed with a Gaussian kernel (rescaled afterwards
    so the global peak value is preserved), floored at a small positive
    value, and log-transformed. At each peak the gradient and Hessian
    come from central differences; the offset is -H^-1 g, clamped
    per-component to +-max_offset. Peaks on the outermost pixel ring, or
    where the Hessian is singular or not negative-definite, keep their
    integer coordinates. Scores pass through untouched.
    """
    if params is None:
        params = PointParams()
    if not peaks:
        return []
    h, w = heatmap.dims
    kernel = _gaussian_kernel(params.sigma, params.kernel_side)
    smooth = ndimage.convolve(
        heatmap.data.astype(np.float64), kernel, mode="constant", cval=0.0
    )
    orig_max = float(heatmap.data.max())
    smooth_max = float(smooth.max())
    if smooth_max > 0.0 and orig_max > 0.0:
        smooth *= orig_max / smooth_max
    logmap = np.log(np.clip(smooth, LOG_FLOOR, None))

    out: list[RefPoint] = []
    mo = params.max_offset
    for p in peaks:
        iy, ix = round_pixel(p.y), round_pixel(p.x)
        if iy <= 0 or ix <= 0 or iy >= h - 1 or ix >= w - 1:
            out.append(RefPoint(float(iy), float(ix), p.score))
            continue
        gy = (logmap[iy + 1, ix] - logmap[iy - 1, ix]) / 2.0
        gx = (logmap[iy, ix + 1] - logmap[iy, ix - 1]) / 2.0
        hyy = logmap[iy + 1, ix] - 2.0 * logmap[iy, ix] + logmap[iy - 1, ix]
        hxx = logmap[iy, ix + 1] - 2.0 * logmap[iy, ix] + logmap[iy, ix - 1]
        hyx = (
            logmap[iy + 1, ix + 1]
            - logmap[iy + 1, ix - 1]
            - logmap[iy - 1, ix + 1]
            + logmap[iy - 1, ix - 1]
        ) / 4.0
        det = hyy * hxx - hyx * hyx
        if not (hyy < 0.0 and det > 0.0):
            out.append(RefPoint(float(iy), float(ix), p.score))
            continue
        dy = -(hxx * gy - hyx * gx) / det
        dx = -(hyy * gx - hyx * gy) / det
        dy = float(np.clip(dy, -mo, mo))
        dx = float(np.clip(dx, -mo, mo))
        out.append(RefPoint(iy + dy, ix + dx, p.score))
    return out


def upscale_points(
    points: list[RefPoint], factor: int, image_dims: tuple[int, int]
) -> list[RefPoint]:
    """Map low-resolution coords to full-resolution pixel centers.

    (y, x) -> ((y + 0.5) * factor - 0.5, likewise for x), clamped into
    the image. A factor of 1 is the identity.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    h, w = image_dims
    out = []
    for p in points:
        uy = min(max((p.y + 0.5) * factor - 0.5, 0.0), float(h - 1))
        ux = min(max((p.x + 0.5) * factor - 0.5, 0.0), float(w - 1))
        out.append(RefPoint(uy, ux, p.score))
    return out


def gate_points(points: list[RefPoint], mask: Grid2D) -> list[RefPoint]:
    """Keep points whose nearest pixel lands on the mask, order preserved."""
    h, w = mask.dims
    data = mask.data
    kept = []
    for p in points:
        iy, ix = round_pixel(p.y), round_pixel(p.x)
        if 0 <= iy < h and 0 <= ix < w and data[iy, ix] == 1:
            kept.append(p)
    return kept


def select_reference_points(
    bundle: PriorBundle,
    refined: RefinedPriors,
    params: PointParams | None = None,
) -> dict[str, list[RefPoint]]:
    """Per-class maxima -> sub-pixel refine -> upscale -> mask gating.

    Raises MissingActivation for classes without an activation map; a
    class whose heatmap yields no maxima simply maps to an empty list.
    """
    if params is None:
        params = PointParams()
    out: dict[str, list[RefPoint]] = {}
    for idx, label in enumerate(bundle.class_labels):
        act = bundle.activations[idx]
        if act is None:
            raise MissingActivation(f"class {label!r} has no activation map")
        peaks = find_local_maxima(act, params.score_threshold)
        refined_pts = gaussian_refine(act, peaks, params)
        full = upscale_points(refined_pts, bundle.downsample_factor, bundle.image_dims)
        out[label] = gate_points(full, refined.refined_masks[idx])
    return out
