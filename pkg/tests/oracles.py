"""Brute-force reference implementations used to check the real ones.

Everything here is written as literal scalar loops over pixels or rows,
independent of the vectorized production code paths.
"""

import math

import numpy as np


def refine_oracle(masks, depth, tau, window_radius, max_passes):
    """Row-major transcription of the depth-guided growth rule.

    masks: list of (H, W) uint8 arrays, depth: (H, W) float32. Returns
    (refined mask list, per-class added pixel counts).
    """
    h, w = depth.shape
    n = len(masks)
    cur = [m.astype(np.uint8).copy() for m in masks]
    added = [0] * n
    for _ in range(max_passes):
        start = [m.copy() for m in cur]
        mus = []
        for m in start:
            vals = [float(depth[y, x]) for y in range(h) for x in range(w) if m[y, x]]
            mus.append(math.fsum(vals) / len(vals) if vals else None)
        changed = False
        for j in range(n):
            if mus[j] is None:
                continue
            for y in range(h):
                for x in range(w):
                    if any(cur[k][y, x] for k in range(n)):
                        continue
                    near = False
                    for yy in range(max(0, y - window_radius), min(h, y + window_radius + 1)):
                        for xx in range(max(0, x - window_radius), min(w, x + window_radius + 1)):
                            if start[j][yy, xx]:
                                near = True
                                break
                        if near:
                            break
                    if not near:
                        continue
                    if abs(float(depth[y, x]) - mus[j]) < tau:
                        cur[j][y, x] = 1
                        added[j] += 1
                        changed = True
        if not changed:
            break
    return cur, added


def maxima_oracle(heat, score_threshold):
    """Exhaustive strict 8-neighbor scan; returns [(y, x, norm_score)]."""
    h, w = heat.shape
    lo = min(float(heat[y, x]) for y in range(h) for x in range(w))
    hi = max(float(heat[y, x]) for y in range(h) for x in range(w))
    out = []
    for y in range(h):
        for x in range(w):
            v = float(heat[y, x])
            strict = True
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if dy == 0 and dx == 0:
                        continue
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and not v > float(heat[ny, nx]):
                        strict = False
            if not strict:
                continue
            norm = 0.0 if hi <= lo else (v - lo) / (hi - lo)
            if norm >= score_threshold:
                out.append((y, x, norm))
    return out


def gate_oracle(points, mask):
    """Keep (y, x, score) triples whose half-up rounded pixel is on the mask."""
    h, w = mask.shape
    kept = []
    for y, x, s in points:
        iy = int(math.floor(y + 0.5))
        ix = int(math.floor(x + 0.5))
        if 0 <= iy < h and 0 <= ix < w and mask[iy, ix] == 1:
            kept.append((y, x, s))
    return kept


def mae_oracle(pairs):
    total = 0.0
    for gt, pred in pairs:
        total += abs(gt - pred)
    return total / len(pairs)


def rmse_oracle(pairs):
    total = 0.0
    for gt, pred in pairs:
        total += (gt - pred) ** 2
    return math.sqrt(total / len(pairs))


def nae_oracle(pairs):
    total, n = 0.0, 0
    for gt, pred in pairs:
        if gt > 0:
            total += abs(gt - pred) / gt
            n += 1
    return total / n


def sre_oracle(pairs):
    total, n = 0.0, 0
    for gt, pred in pairs:
        if gt > 0:
            total += (gt - pred) ** 2 / gt
            n += 1
    return math.sqrt(total / n)


def mrmse_oracle(rows, nonzero_only):
    """rows: (label, gt, pred) triples."""
    labels = sorted({r[0] for r in rows})
    vals = []
    for label in labels:
        sq, n = 0.0, 0
        for lbl, gt, pred in rows:
            if lbl != label:
                continue
            if nonzero_only and not gt > 0:
                continue
            sq += (gt - pred) ** 2
            n += 1
        if n:
            vals.append(math.sqrt(sq / n))
    if not vals:
        return None
    return sum(vals) / len(vals)
