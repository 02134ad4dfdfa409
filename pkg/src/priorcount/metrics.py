"""Counting metrics, dataset splits, and the evaluation report.

Annotation ground truth travels as JSONL, one image per line:

    {"image_id": "im1", "domain": "household",
     "objects": [{"label": "cup", "count": 3,
                  "points": [[y, x], ...],     // optional, len == count
                  "boxes": [[y0,x0,y1,x1], ..] // optional, len == count
                }],
     "vqa": [{"q": "...", "a": "..."}]}        // optional, carried through

MAE and RMSE average over all rows; NAE and SRE average only over rows
with positive ground truth. mRMSE averages per-class RMSE uniformly
across classes that contribute at least one row.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from .errors import (
    AllZeroGroundTruth,
    AnnotationError,
    EmptyTable,
    IoFailure,
    MissingGroundTruth,
    TooFewClasses,
)


@dataclass(frozen=True)
class ObjectAnnotation:
    label: str
    count: int
    points: tuple[tuple[float, float], ...] | None = None
    boxes: tuple[tuple[float, float, float, float], ...] | None = None

    def __post_init__(self):
        if not self.label:
            raise AnnotationError("object label must be a non-empty string")
        if self.count < 0:
            raise AnnotationError(f"count must be >= 0, got {self.count}")
        if self.points is not None and len(self.points) != self.count:
            raise AnnotationError(
                f"{self.label!r}: {len(self.points)} points but count={self.count}"
            )
        if self.boxes is not None and len(self.boxes) != self.count:
            raise AnnotationError(
                f"{self.label!r}: {len(self.boxes)} boxes but count={self.count}"
            )


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    domain: str
    objects: tuple[ObjectAnnotation, ...]
    vqa: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.image_id:
            raise AnnotationError("image_id must be a non-empty string")
        labels = [o.label for o in self.objects]
        if len(set(labels)) != len(labels):
            raise AnnotationError(f"duplicate object labels for image {self.image_id!r}")


@dataclass(frozen=True)
class EvalRow:
    image_id: str
    label: str
    gt: float
    pred: float


@dataclass(frozen=True)
class EvalTable:
    rows: tuple[EvalRow, ...]

    def __post_init__(self):
        keys = [(r.image_id, r.label) for r in self.rows]
        if len(set(keys)) != len(keys):
            raise AnnotationError("duplicate (image_id, label) row in eval table")


def _parse_record(doc: dict, where: str) -> AnnotationRecord:
    if not isinstance(doc, dict):
        raise AnnotationError(f"{where}: record must be a JSON object")
    for key in ("image_id", "domain", "objects"):
        if key not in doc:
            raise AnnotationError(f"{where}: missing field {key!r}")
    objs = []
    for i, o in enumerate(doc["objects"]):
        if not isinstance(o, dict) or "label" not in o or "count" not in o:
            raise AnnotationError(f"{where}: objects[{i}] needs label and count")
        pts = o.get("points")
        boxes = o.get("boxes")
        objs.append(
            ObjectAnnotation(
                label=str(o["label"]),
                count=int(o["count"]),
                points=tuple((float(p[0]), float(p[1])) for p in pts) if pts is not None else None,
                boxes=tuple(
                    (float(b[0]), float(b[1]), float(b[2]), float(b[3])) for b in boxes
                )
                if boxes is not None
                else None,
            )
        )
    vqa = ()
    if doc.get("vqa") is not None:
        try:
            vqa = tuple((str(v["q"]), str(v["a"])) for v in doc["vqa"])
        except (TypeError, KeyError):
            raise AnnotationError(f"{where}: vqa entries need q and a fields")
    return AnnotationRecord(
        image_id=str(doc["image_id"]),
        domain=str(doc["domain"]),
        objects=tuple(objs),
        vqa=vqa,
    )


def read_annotations(path) -> list[AnnotationRecord]:
    """Parse a JSONL annotation file; errors name the offending line."""
    records = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoFailure(f"cannot read annotations {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AnnotationError(f"{where}: invalid JSON: {exc}") from exc
        except ValueError as exc:
            raise AnnotationError(f"{where}: {exc}") from exc
        try:
            records.append(_parse_record(doc, where))
        except (TypeError, ValueError, IndexError) as exc:
            raise AnnotationError(f"{where}: {exc}") from exc
    return records


def record_to_dict(rec: AnnotationRecord) -> dict:
    objs = []
    for o in rec.objects:
        d: dict = {"label": o.label, "count": o.count}
        if o.points is not None:
            d["points"] = [[p[0], p[1]] for p in o.points]
        if o.boxes is not None:
            d["boxes"] = [[b[0], b[1], b[2], b[3]] for b in o.boxes]
        objs.append(d)
    out: dict = {"image_id": rec.image_id, "domain": rec.domain, "objects": objs}
    if rec.vqa:
        out["vqa"] = [{"q": q, "a": a} for q, a in rec.vqa]
    return out


# --- metrics ---


def _require_rows(table: EvalTable):
    if not table.rows:
        raise EmptyTable("metric over an empty table is undefined")


def mae(table: EvalTable) -> float:
    _require_rows(table)
    return math.fsum(abs(r.gt - r.pred) for r in table.rows) / len(table.rows)


def rmse(table: EvalTable) -> float:
    _require_rows(table)
    return math.sqrt(math.fsum((r.gt - r.pred) ** 2 for r in table.rows) / len(table.rows))


def nae(table: EvalTable) -> float:
    _require_rows(table)
    rows = [r for r in table.rows if r.gt > 0]
    if not rows:
        raise AllZeroGroundTruth("NAE needs at least one row with positive ground truth")
    return math.fsum(abs(r.gt - r.pred) / r.gt for r in rows) / len(rows)


def sre(table: EvalTable) -> float:
    _require_rows(table)
    rows = [r for r in table.rows if r.gt > 0]
    if not rows:
        raise AllZeroGroundTruth("SRE needs at least one row with positive ground truth")
    return math.sqrt(math.fsum((r.gt - r.pred) ** 2 / r.gt for r in rows) / len(rows))


def mrmse(table: EvalTable, nonzero_only: bool = False) -> float:
    """Per-class RMSE averaged uniformly over contributing classes.

    With ``nonzero_only`` each class's RMSE is computed over its rows
    with positive ground truth; classes left with no rows drop out. If
    no class contributes at all, EmptyTable is raised.
    """
    _require_rows(table)
    by_label: dict[str, list[EvalRow]] = {}
    for r in table.rows:
        by_label.setdefault(r.label, []).append(r)
    per_class = []
    for label in sorted(by_label):
        rows = by_label[label]
        if nonzero_only:
            rows = [r for r in rows if r.gt > 0]
        if not rows:
            continue
        per_class.append(
            math.sqrt(math.fsum((r.gt - r.pred) ** 2 for r in rows) / len(rows))
        )
    if not per_class:
        raise EmptyTable("no class contributes rows to mRMSE")
    return math.fsum(per_class) / len(per_class)


# --- splits ---


def generate_zero_shot_split(
    records: list[AnnotationRecord],
    ratio: float = 0.6,
    seed: int = 0,
    excluded_domains: tuple[str, ...] = (),
) -> tuple[list[str], list[str]]:
    """Partition class labels into train/test by seeded shuffle.

    The train side takes round(ratio * n_classes) labels (half rounds
    up). Classes seen in any excluded domain are forced into test
    before the shuffle. Raises TooFewClasses below two labels.
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    labels = sorted({o.label for rec in records for o in rec.objects})
    if len(labels) < 2:
        raise TooFewClasses(f"need at least 2 classes, got {len(labels)}")
    forced_test = {
        o.label
        for rec in records
        if rec.domain in set(excluded_domains)
        for o in rec.objects
    }
    pool = [l for l in labels if l not in forced_test]
    rng = random.Random(seed)
    rng.shuffle(pool)
    n_train = min(int(math.floor(ratio * len(labels) + 0.5)), len(pool))
    train = sorted(pool[:n_train])
    test = sorted(pool[n_train:] + sorted(forced_test))
    return train, test


def generate_few_shot_split(
    records: list[AnnotationRecord],
    shots: int,
    seed: int = 0,
) -> tuple[dict[str, list[str]], list[str]]:
    """Pick min(shots, available) train images per class, rest is test.

    An image sampled as a shot for any class leaves the test side
    entirely, so the two image sets never overlap.
    """
    if not (1 <= shots <= 5):
        raise ValueError(f"shots must lie in [1, 5], got {shots}")
    images_by_class: dict[str, list[str]] = {}
    all_images: list[str] = []
    seen = set()
    for rec in records:
        if rec.image_id not in seen:
            seen.add(rec.image_id)
            all_images.append(rec.image_id)
        for o in rec.objects:
            images_by_class.setdefault(o.label, [])
            if rec.image_id not in images_by_class[o.label]:
                images_by_class[o.label].append(rec.image_id)
    rng = random.Random(seed)
    train_by_class: dict[str, list[str]] = {}
    train_ids: set[str] = set()
    for label in sorted(images_by_class):
        avail = sorted(images_by_class[label])
        pick = rng.sample(avail, min(shots, len(avail)))
        train_by_class[label] = sorted(pick)
        train_ids.update(pick)
    test = [i for i in sorted(all_images) if i not in train_ids]
    return train_by_class, test


# --- evaluation ---

_METRIC_KEYS = ("mae", "rmse", "nae", "sre", "mrmse", "mrmse_nz")


def _metric_block(table: EvalTable) -> dict:
    block: dict = {"mae": mae(table), "rmse": rmse(table)}
    try:
        block["nae"] = nae(table)
        block["sre"] = sre(table)
    except AllZeroGroundTruth:
        block["nae"] = None
        block["sre"] = None
    block["mrmse"] = mrmse(table, nonzero_only=False)
    try:
        block["mrmse_nz"] = mrmse(table, nonzero_only=True)
    except EmptyTable:
        block["mrmse_nz"] = None
    return block


def build_eval_table(results, records: list[AnnotationRecord]) -> tuple[EvalTable, int]:
    """Join predicted counts with ground truth.

    Returns the table and the number of per-class error entries that
    carried no count. Raises MissingGroundTruth when a prediction has
    no matching annotation.
    """
    gt_index: dict[tuple[str, str], int] = {}
    for rec in records:
        for o in rec.objects:
            gt_index[(rec.image_id, o.label)] = o.count
    rows = []
    n_errors = 0
    for res in results:
        for entry in res.classes:
            if entry.error is not None or entry.count is None:
                n_errors += 1
                continue
            key = (res.image_id, entry.label)
            if key not in gt_index:
                raise MissingGroundTruth(f"no annotation for image {key[0]!r} label {key[1]!r}")
            rows.append(
                EvalRow(
                    image_id=res.image_id,
                    label=entry.label,
                    gt=float(gt_index[key]),
                    pred=float(entry.count),
                )
            )
    return EvalTable(rows=tuple(rows)), n_errors


def evaluate(results, records: list[AnnotationRecord]) -> dict:
    """Full report: overall metrics, per-domain metrics, per-class RMSE."""
    table, n_errors = build_eval_table(results, records)
    if not table.rows:
        raise EmptyTable("no evaluable (image, class) pairs")
    domain_of: dict[str, str] = {rec.image_id: rec.domain for rec in records}

    report: dict = {
        "n_rows": len(table.rows),
        "n_images": len({r.image_id for r in table.rows}),
        "n_classes": len({r.label for r in table.rows}),
        "n_class_errors": n_errors,
        "metrics": _metric_block(table),
    }

    by_domain: dict[str, list[EvalRow]] = {}
    for r in table.rows:
        by_domain.setdefault(domain_of[r.image_id], []).append(r)
    report["per_domain"] = {
        dom: _metric_block(EvalTable(rows=tuple(rows)))
        for dom, rows in sorted(by_domain.items())
    }

    by_label: dict[str, list[EvalRow]] = {}
    for r in table.rows:
        by_label.setdefault(r.label, []).append(r)
    report["per_class_rmse"] = {
        label: rmse(EvalTable(rows=tuple(rows))) for label, rows in sorted(by_label.items())
    }
    return report


def format_report(report: dict) -> str:
    """Aligned plain-text rendering of an evaluate() report."""

    def fmt(v):
        return "-" if v is None else f"{v:.4f}"

    lines = []
    lines.append(
        f"rows={report['n_rows']}  images={report['n_images']}  "
        f"classes={report['n_classes']}  class_errors={report['n_class_errors']}"
    )
    header = f"{'scope':<24}" + "".join(f"{k:>10}" for k in _METRIC_KEYS)
    lines.append(header)
    lines.append("-" * len(header))
    m = report["metrics"]
    lines.append(f"{'overall':<24}" + "".join(f"{fmt(m[k]):>10}" for k in _METRIC_KEYS))
    for dom, block in report["per_domain"].items():
        lines.append(f"{dom:<24}" + "".join(f"{fmt(block[k]):>10}" for k in _METRIC_KEYS))
    lines.append("")
    lines.append(f"{'class':<24}{'rmse':>10}")
    for label, v in report["per_class_rmse"].items():
        lines.append(f"{label:<24}{v:>10.4f}")
    return "\n".join(lines)
