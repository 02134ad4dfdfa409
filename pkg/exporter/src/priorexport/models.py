"""Model wrappers behind a name registry.

Model identity is configuration, not code: callers name a semantic,
depth, or promptable model and get back a callable wrapper. Only the
"stub" wrappers ship here; real backends register their own factory
under a new name at import time. The stubs are deterministic functions
of the image so contract tests need no weights.
"""

import math

import numpy as np

from .errors import ModelLoadFailure


def _luminance(rgb: np.ndarray) -> np.ndarray:
    return rgb.astype(np.float64).mean(axis=2)


def _ceil_pool(values: np.ndarray, factor: int) -> np.ndarray:
    """Mean-pool to (ceil(H/f), ceil(W/f)) with zero padding at the edges."""
    h, w = values.shape
    lh, lw = math.ceil(h / factor), math.ceil(w / factor)
    padded = np.zeros((lh * factor, lw * factor), dtype=np.float64)
    padded[:h, :w] = values
    pooled = padded.reshape(lh, factor, lw, factor).mean(axis=(1, 3))
    return pooled.astype(np.float32)


class StubSemantic:
    """Threshold the image luminance at a per-class quantile.

    Class i of n gets the quantile 0.55 + 0.35 * i / max(n - 1, 1),
    so earlier labels produce larger masks. The activation heatmap is
    the mean-pooled mask density on the downsampled lattice.
    """

    def __call__(self, rgb: np.ndarray, labels, factor: int):
        lum = _luminance(rgb)
        n = len(labels)
        masks = []
        activations = []
        for i in range(n):
            q = 0.55 + 0.35 * (i / max(n - 1, 1))
            cut = float(np.quantile(lum, q))
            mask = (lum >= cut).astype(np.uint8)
            masks.append(mask)
            activations.append(_ceil_pool(mask.astype(np.float64), factor))
        return masks, activations


class StubDepth:
    """Raw depth proxy: image luminance (brighter reads as farther)."""

    def __call__(self, rgb: np.ndarray) -> np.ndarray:
        return _luminance(rgb)


class StubPromptable:
    """One fixed-radius disk per prompt; out-of-frame prompts yield none."""

    radius = 4

    def __call__(self, patch: np.ndarray, points) -> list:
        h, w = patch.shape[:2]
        masks = []
        for p in points:
            cy = int(math.floor(float(p["y"]) + 0.5))
            cx = int(math.floor(float(p["x"]) + 0.5))
            if not (0 <= cy < h and 0 <= cx < w):
                continue
            yy, xx = np.ogrid[:h, :w]
            disk = (yy - cy) ** 2 + (xx - cx) ** 2 <= self.radius**2
            masks.append(disk.astype(np.uint8))
        return masks


_SEMANTIC = {"stub": StubSemantic}
_DEPTH = {"stub": StubDepth}
_PROMPTABLE = {"stub": StubPromptable}


def register_semantic(name: str, factory) -> None:
    _SEMANTIC[name] = factory


def register_depth(name: str, factory) -> None:
    _DEPTH[name] = factory


def register_promptable(name: str, factory) -> None:
    _PROMPTABLE[name] = factory


def _build(registry, kind, name):
    try:
        factory = registry[name]
    except KeyError:
        known = ", ".join(sorted(registry))
        raise ModelLoadFailure(f"unknown {kind} model {name!r} (registered: {known})")
    return factory()


def semantic_model(name: str):
    return _build(_SEMANTIC, "semantic", name)


def depth_model(name: str):
    return _build(_DEPTH, "depth", name)


def promptable_model(name: str):
    return _build(_PROMPTABLE, "promptable", name)
