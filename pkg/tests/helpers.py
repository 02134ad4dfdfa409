"""Small construction helpers shared across test modules."""

import math

import numpy as np
from scipy import ndimage

from priorcount.bundle import PriorBundle
from priorcount.grids import Grid2D
from priorcount.refine import RefineParams, refine_masks


def make_bundle(masks, depth, activations=None, image_id="img", factor=16, rgb=None):
    """Wrap raw arrays into a PriorBundle with minimal ceremony."""
    masks = [np.asarray(m, dtype=np.uint8) for m in masks]
    depth = np.asarray(depth, dtype=np.float32)
    labels = tuple(f"c{i}" for i in range(len(masks)))
    acts = ()
    if activations is not None:
        acts = tuple(
            None if a is None else Grid2D(np.asarray(a, dtype=np.float32))
            for a in activations
        )
    return PriorBundle(
        image_id=image_id,
        image_dims=depth.shape,
        class_labels=labels,
        semantic_masks=tuple(Grid2D(m) for m in masks),
        depth=Grid2D(depth),
        activations=acts,
        rgb=rgb,
        downsample_factor=factor,
    )


def random_refine_instance(rng, max_h=16, max_w=16, max_classes=3, force_disjoint=None):
    """Random masks/depth/params drawing from the documented stress ranges.

    force_disjoint=None leaves a 50% coin flip between disjoint and
    possibly-overlapping seed masks; True/False pins the choice.
    """
    h = int(rng.integers(4, max_h + 1))
    w = int(rng.integers(4, max_w + 1))
    n = int(rng.integers(1, max_classes + 1))
    masks = []
    for _ in range(n):
        p = float(rng.uniform(0.05, 0.45))
        m = (rng.random((h, w)) < p).astype(np.uint8)
        if rng.random() < 0.15:
            m[:] = 0  # empty class masks must pass through untouched
        masks.append(m)
    if force_disjoint is None:
        force_disjoint = rng.random() < 0.5
    if force_disjoint:
        taken = np.zeros((h, w), dtype=bool)
        for m in masks:
            m[taken] = 0
            taken |= m > 0
    depth = rng.random((h, w)).astype(np.float32)
    tau = float(rng.choice([0.1, 0.3, 0.5]))
    window = int(rng.choice([1, 2]))
    return masks, depth, tau, window


def refine_invariants_hold(masks, depth, tau, window, passes):
    """Check every structural guarantee of mask growth on one instance.

    Returns (ok, reason). Covers: binary output, monotone growth,
    locality of growth to the pass-iterated window reach, pairwise
    disjointness when inputs are disjoint, determinism across reruns,
    the single-pass depth bound on every added pixel, and idempotence
    at the saturation fixpoint.
    """
    bundle = make_bundle(masks, depth)
    params = RefineParams(tau=tau, window_radius=window, max_passes=passes)
    out = refine_masks(bundle, params)
    rerun = refine_masks(bundle, params)

    inputs_disjoint = True
    taken = np.zeros(depth.shape, dtype=bool)
    for m in masks:
        if (taken & (m > 0)).any():
            inputs_disjoint = False
        taken |= m > 0

    struct = np.ones((2 * window + 1, 2 * window + 1), dtype=bool)
    claimed = np.zeros(depth.shape, dtype=bool)
    for j, grid in enumerate(out.refined_masks):
        ref = grid.data
        orig = masks[j] > 0
        if not np.isin(ref, (0, 1)).all():
            return False, f"class {j} output not binary"
        if (orig & (ref == 0)).any():
            return False, f"class {j} lost an input pixel"
        reach = orig.copy()
        for _ in range(passes):
            reach = ndimage.binary_dilation(reach, structure=struct)
        if ((ref > 0) & ~reach).any():
            return False, f"class {j} grew outside its reach"
        if inputs_disjoint:
            if (claimed & (ref > 0)).any():
                return False, f"class {j} overlaps an earlier class"
            claimed |= ref > 0
        if not np.array_equal(ref, rerun.refined_masks[j].data):
            return False, f"class {j} nondeterministic"
        if passes == 1 and orig.any():
            mu = math.fsum(float(depth[p]) for p in zip(*np.nonzero(orig))) / int(orig.sum())
            for y, x in zip(*np.nonzero((ref > 0) & ~orig)):
                if not abs(float(depth[y, x]) - mu) < tau:
                    return False, f"class {j} added pixel outside tau"

    # Fixpoint idempotence: once growth saturates (a pass budget no
    # trajectory can exhaust), one more pass must change nothing.
    sat_passes = 2 * (depth.shape[0] + depth.shape[1])
    sat = refine_masks(bundle, RefineParams(tau=tau, window_radius=window, max_passes=sat_passes))
    more = refine_masks(
        bundle, RefineParams(tau=tau, window_radius=window, max_passes=sat_passes + 1)
    )
    for j in range(len(sat.refined_masks)):
        if not np.array_equal(sat.refined_masks[j].data, more.refined_masks[j].data):
            return False, f"class {j} not idempotent at fixpoint"
    return True, ""
