"""Point-prompted instance segmentation backends.

Two backends share one interface: a depth-aware reference backend that
flood-fills the class mask around each prompt, and an adapter that
hands an rgb patch plus prompts to an external command through a file
exchange directory.

Exchange protocol, all files in one directory per request:

    request   patch.ocpt   float32 (H, W, 3) tensor
              points.json  [{"y": .., "x": .., "score": ..}, ...]
    invoke    $OMNI_SEG_CMD <dir>     (timeout $OMNI_SEG_TIMEOUT_S, default 120)
    response  mask_000.ocpt .. mask_NNN.ocpt   uint8 (H, W) masks
              done.json    {"n_masks": N}
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from glob import glob

import numpy as np

from .errors import (
    BackendUnavailable,
    DimMismatch,
    ProtocolViolation,
    Timeout,
)
from .grids import Grid2D, Grid3D, read_tensor_file, write_tensor_file
from .refpoints import RefPoint, round_pixel

ENV_SEG_CMD = "OMNI_SEG_CMD"
ENV_SEG_TIMEOUT = "OMNI_SEG_TIMEOUT_S"
DEFAULT_TIMEOUT_S = 120.0


@dataclass(frozen=True)
class SegmentParams:
    min_area: int = 20
    flood_tau: float = 0.3
    dedupe_iou: float | None = None

    def __post_init__(self):
        if self.min_area < 1:
            raise ValueError(f"min_area must be >= 1, got {self.min_area}")
        if not (0.0 < self.flood_tau <= 1.0):
            raise ValueError(f"flood_tau must lie in (0, 1], got {self.flood_tau}")
        if self.dedupe_iou is not None and not (0.0 < self.dedupe_iou <= 1.0):
            raise ValueError(f"dedupe_iou must lie in (0, 1], got {self.dedupe_iou}")


@dataclass(frozen=True)
class InstanceMaskSet:
    """Candidate instance masks for one class plus the surviving indices."""

    class_label: str
    masks: tuple[Grid2D, ...]
    filtered: tuple[int, ...]

    def __post_init__(self):
        n = len(self.masks)
        if len(set(self.filtered)) != len(self.filtered):
            raise ValueError("filtered indices must be unique")
        if any(i < 0 or i >= n for i in self.filtered):
            raise ValueError("filtered index out of range")


def count(mask_set: InstanceMaskSet) -> int:
    """Instances that survived filtering."""
    return len(mask_set.filtered)


def extract_rgb_patch(rgb: Grid3D, mask: Grid2D) -> Grid3D:
    """Zero out rgb pixels outside the mask (per-pixel multiply)."""
    if rgb.dims[:2] != mask.dims:
        raise DimMismatch(f"rgb dims {rgb.dims[:2]} != mask dims {mask.dims}")
    patch = rgb.data * (mask.data > 0)[:, :, None].astype(np.float32)
    return Grid3D(patch.astype(np.float32))


def reference_segment(
    class_mask: Grid2D,
    depth: Grid2D,
    points: list[RefPoint],
    params: SegmentParams | None = None,
    class_label: str = "",
) -> InstanceMaskSet:
    """Depth-gated flood fill from each prompt, earlier prompts win.

    For each point in order: take its nearest pixel; if that pixel is
    on the class mask and not yet claimed by an earlier instance, grow a
    4-connected region over on-mask, unclaimed pixels whose depth lies
    strictly within ``flood_tau`` of the seed pixel's depth. Each region
    becomes one instance mask. Points off the mask, or on claimed
    pixels, produce nothing.
    """
    if params is None:
        params = SegmentParams()
    if class_mask.dims != depth.dims:
        raise DimMismatch(f"mask dims {class_mask.dims} != depth dims {depth.dims}")
    h, w = class_mask.dims
    mask = class_mask.data
    dep = depth.data
    claimed = np.zeros((h, w), dtype=bool)
    tau = params.flood_tau
    masks: list[Grid2D] = []

    for p in points:
        sy, sx = round_pixel(p.y), round_pixel(p.x)
        if not (0 <= sy < h and 0 <= sx < w):
            continue
        if mask[sy, sx] != 1 or claimed[sy, sx]:
            continue
        seed_d = float(dep[sy, sx])
        region = np.zeros((h, w), dtype=np.uint8)
        stack = [(sy, sx)]
        region[sy, sx] = 1
        claimed[sy, sx] = True
        while stack:
            y, x = stack.pop()
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if not (0 <= ny < h and 0 <= nx < w):
                    continue
                if region[ny, nx] or claimed[ny, nx] or mask[ny, nx] != 1:
                    continue
                if abs(float(dep[ny, nx]) - seed_d) >= tau:
                    continue
                region[ny, nx] = 1
                claimed[ny, nx] = True
                stack.append((ny, nx))
        masks.append(Grid2D(region))

    return InstanceMaskSet(
        class_label=class_label,
        masks=tuple(masks),
        filtered=tuple(range(len(masks))),
    )


def _iou(a: Grid2D, b: Grid2D) -> float:
    am = a.data > 0
    bm = b.data > 0
    union = int(np.logical_or(am, bm).sum())
    if union == 0:
        return 0.0
    inter = int(np.logical_and(am, bm).sum())
    return inter / union


def filter_masks(mask_set: InstanceMaskSet, params: SegmentParams | None = None) -> InstanceMaskSet:
    """Drop masks below min_area; optionally dedupe by IoU.

    Dedupe walks survivors largest-area-first (ties by index) and drops
    any mask whose IoU with an already kept mask exceeds ``dedupe_iou``.
    The surviving indices come back sorted ascending.
    """
    if params is None:
        params = SegmentParams()
    areas = [int((m.data > 0).sum()) for m in mask_set.masks]
    eligible = [i for i, a in enumerate(areas) if a >= params.min_area]
    if params.dedupe_iou is not None:
        order = sorted(eligible, key=lambda i: (-areas[i], i))
        kept: list[int] = []
        for i in order:
            if all(_iou(mask_set.masks[i], mask_set.masks[k]) <= params.dedupe_iou for k in kept):
                kept.append(i)
        eligible = sorted(kept)
    return InstanceMaskSet(
        class_label=mask_set.class_label,
        masks=mask_set.masks,
        filtered=tuple(eligible),
    )


def _clear_responses(exchange_dir: str) -> None:
    for path in glob(os.path.join(exchange_dir, "mask_*.ocpt")):
        os.unlink(path)
    done = os.path.join(exchange_dir, "done.json")
    if os.path.exists(done):
        os.unlink(done)


def external_segment(
    rgb_patch: Grid3D,
    points: list[RefPoint],
    exchange_dir,
    command: str | None = None,
    timeout_s: float | None = None,
    class_label: str = "",
) -> InstanceMaskSet:
    """Run one request/response cycle against the external command.

    The command comes from ``command`` or $OMNI_SEG_CMD and is invoked
    with the exchange directory as its sole appended argument. Raises
    BackendUnavailable when no command is configured or it exits
    nonzero, Timeout on overrun, and ProtocolViolation when the
    response files are missing or malformed.
    """
    if command is None:
        command = os.environ.get(ENV_SEG_CMD)
    if not command:
        raise BackendUnavailable(f"no external segmenter command (set ${ENV_SEG_CMD})")
    if timeout_s is None:
        raw = os.environ.get(ENV_SEG_TIMEOUT, "")
        try:
            timeout_s = float(raw) if raw else DEFAULT_TIMEOUT_S
        except ValueError:
            raise BackendUnavailable(f"${ENV_SEG_TIMEOUT} must be numeric, got {raw!r}")

    os.makedirs(exchange_dir, exist_ok=True)
    _clear_responses(exchange_dir)
    write_tensor_file(os.path.join(exchange_dir, "patch.ocpt"), rgb_patch)
    payload = [{"y": p.y, "x": p.x, "score": p.score} for p in points]
    with open(os.path.join(exchange_dir, "points.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh)

    argv = shlex.split(command) + [str(exchange_dir)]
    try:
        proc = subprocess.run(
            argv,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            timeout=timeout_s,
        )
    except subprocess.TimeoutExpired:
        raise Timeout(f"external segmenter exceeded {timeout_s}s")
    except OSError as exc:
        raise BackendUnavailable(f"cannot launch {argv[0]!r}: {exc}")
    if proc.returncode != 0:
        tail = proc.stderr.decode(errors="replace")[-500:]
        raise BackendUnavailable(
            f"external segmenter exited {proc.returncode}: {tail}"
        )

    done_path = os.path.join(exchange_dir, "done.json")
    try:
        with open(done_path, "r", encoding="utf-8") as fh:
            done = json.load(fh)
    except OSError:
        raise ProtocolViolation("external segmenter wrote no done.json")
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"done.json is not valid JSON: {exc}")
    n_masks = done.get("n_masks") if isinstance(done, dict) else None
    if not isinstance(n_masks, int) or n_masks < 0:
        raise ProtocolViolation(f"done.json must hold a non-negative integer n_masks, got {done!r}")

    hw = rgb_patch.dims[:2]
    masks: list[Grid2D] = []
    for i in range(n_masks):
        path = os.path.join(exchange_dir, f"mask_{i:03d}.ocpt")
        if not os.path.exists(path):
            raise ProtocolViolation(f"done.json promises {n_masks} masks but {path} is missing")
        grid = read_tensor_file(path)
        if not isinstance(grid, Grid2D) or grid.data.dtype != np.uint8:
            raise ProtocolViolation(f"{path} must be a uint8 2-d mask")
        if grid.dims != hw:
            raise ProtocolViolation(f"{path} dims {grid.dims} != patch dims {hw}")
        if grid.data.max(initial=0) > 1:
            raise ProtocolViolation(f"{path} holds values outside {{0,1}}")
        masks.append(grid)

    return InstanceMaskSet(
        class_label=class_label,
        masks=tuple(masks),
        filtered=tuple(range(len(masks))),
    )


class SegmenterBackend(ABC):
    """Capability-flagged strategy interface the pipeline drives."""

    accepts_rgb: bool = False
    accepts_depth: bool = False

    @abstractmethod
    def segment(
        self,
        class_label: str,
        class_mask: Grid2D,
        points: list[RefPoint],
        params: SegmentParams,
        depth: Grid2D | None = None,
        rgb_patch: Grid3D | None = None,
    ) -> InstanceMaskSet:
        """Produce candidate instance masks for one class. Must be deterministic."""


class ReferenceBackend(SegmenterBackend):
    """Depth flood-fill backend; needs depth, ignores rgb."""

    accepts_rgb = False
    accepts_depth = True

    def segment(self, class_label, class_mask, points, params, depth=None, rgb_patch=None):
        if depth is None:
            raise BackendUnavailable("reference backend requires a depth grid")
        return reference_segment(class_mask, depth, points, params, class_label=class_label)


class ExternalBackend(SegmenterBackend):
    """File-exchange backend; needs rgb, ignores depth.

    One backend instance owns one exchange directory and serializes
    calls on it, so a directory never carries two requests at once.
    """

    accepts_rgb = True
    accepts_depth = False

    def __init__(self, exchange_dir, command: str | None = None, timeout_s: float | None = None):
        self.exchange_dir = str(exchange_dir)
        self.command = command
        self.timeout_s = timeout_s
        self._lock = threading.Lock()

    def segment(self, class_label, class_mask, points, params, depth=None, rgb_patch=None):
        if rgb_patch is None:
            raise BackendUnavailable("external backend requires an rgb patch")
        with self._lock:
            return external_segment(
                rgb_patch,
                points,
                self.exchange_dir,
                command=self.command,
                timeout_s=self.timeout_s,
                class_label=class_label,
            )
