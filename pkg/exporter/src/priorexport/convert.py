"""Convert public-dataset annotation styles into the evaluation JSONL.

Target schema, one JSON object per line:

    {"image_id": str, "domain": str,
     "objects": [{"label": str, "count": int,
                  "points": [[y, x], ...],      // optional, len == count
                  "boxes": [[y0, x0, y1, x1], ...]}],  // optional, len == count
     "vqa": [{"q": str, "a": str}, ...]}        // optional, never scored

Three source styles are accepted:

- "fsc147": one JSON object mapping image id to {"class": label,
  "points": [[y, x], ...]}; point count is the count.
- "voc": a JSON array of {"image_id", "objects": [{"name",
  "bndbox": {"xmin", "ymin", "xmax", "ymax"}}, ...]}; boxes group by
  name and the box cardinality is the count. No points exist.
- "omnicount": a JSON array (or JSONL file) already shaped like the
  target; counts are validated against any points/boxes present.

Records missing a domain get the source format name as their domain.
"""

import json
import os

from .errors import SchemaMismatch

FORMATS = ("fsc147", "voc", "omnicount")


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not valid JSON: {exc}") from exc


def _load_json_or_jsonl(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError:
        raise
    try:
        doc = json.loads(text)
        return doc if isinstance(doc, list) else [doc]
    except json.JSONDecodeError:
        docs = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                docs.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaMismatch(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        return docs


def _convert_fsc147(path) -> list[dict]:
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise SchemaMismatch(f"{path}: fsc147 source must map image id to annotation")
    records = []
    for image_id in sorted(doc):
        ann = doc[image_id]
        if not isinstance(ann, dict) or "class" not in ann or "points" not in ann:
            raise SchemaMismatch(f"{path}: image {image_id!r} needs 'class' and 'points'")
        points = ann["points"]
        if not isinstance(points, list) or not all(
            isinstance(p, list) and len(p) == 2 for p in points
        ):
            raise SchemaMismatch(f"{path}: image {image_id!r} points must be [y, x] pairs")
        records.append(
            {
                "image_id": str(image_id),
                "domain": str(ann.get("domain", "fsc147")),
                "objects": [
                    {
                        "label": str(ann["class"]),
                        "count": len(points),
                        "points": [[float(p[0]), float(p[1])] for p in points],
                    }
                ],
            }
        )
    return records


def _convert_voc(path) -> list[dict]:
    doc = _load_json(path)
    if not isinstance(doc, list):
        raise SchemaMismatch(f"{path}: voc source must be a JSON array of records")
    records = []
    for i, rec in enumerate(doc):
        if not isinstance(rec, dict) or "image_id" not in rec or "objects" not in rec:
            raise SchemaMismatch(f"{path}: record {i} needs 'image_id' and 'objects'")
        boxes_by_label: dict[str, list] = {}
        for j, obj in enumerate(rec["objects"]):
            where = f"{path}: record {i} object {j}"
            if not isinstance(obj, dict) or "name" not in obj or "bndbox" not in obj:
                raise SchemaMismatch(f"{where} needs 'name' and 'bndbox'")
            box = obj["bndbox"]
            try:
                y0, x0 = float(box["ymin"]), float(box["xmin"])
                y1, x1 = float(box["ymax"]), float(box["xmax"])
            except (TypeError, KeyError, ValueError) as exc:
                raise SchemaMismatch(f"{where}: bad bndbox: {exc}") from exc
            boxes_by_label.setdefault(str(obj["name"]), []).append([y0, x0, y1, x1])
        records.append(
            {
                "image_id": str(rec["image_id"]),
                "domain": str(rec.get("domain", "voc")),
                "objects": [
                    {"label": label, "count": len(boxes), "boxes": boxes}
                    for label, boxes in sorted(boxes_by_label.items())
                ],
            }
        )
    return records


def _convert_omnicount(path) -> list[dict]:
    docs = _load_json_or_jsonl(path)
    records = []
    for i, rec in enumerate(docs):
        where = f"{path}: record {i}"
        if not isinstance(rec, dict):
            raise SchemaMismatch(f"{where} must be a JSON object")
        for key in ("image_id", "domain", "objects"):
            if key not in rec:
                raise SchemaMismatch(f"{where} missing field {key!r}")
        objects = []
        for j, obj in enumerate(rec["objects"]):
            owhere = f"{where} object {j}"
            if not isinstance(obj, dict) or "label" not in obj or "count" not in obj:
                raise SchemaMismatch(f"{owhere} needs 'label' and 'count'")
            count = obj["count"]
            if not isinstance(count, int) or count < 0:
                raise SchemaMismatch(f"{owhere}: count must be a non-negative integer")
            out = {"label": str(obj["label"]), "count": count}
            for field in ("points", "boxes"):
                if obj.get(field) is not None:
                    if len(obj[field]) != count:
                        raise SchemaMismatch(
                            f"{owhere}: {len(obj[field])} {field} but count={count}"
                        )
                    out[field] = obj[field]
            objects.append(out)
        converted = {
            "image_id": str(rec["image_id"]),
            "domain": str(rec["domain"]),
            "objects": objects,
        }
        if rec.get("vqa"):
            vqa = rec["vqa"]
            if not isinstance(vqa, list) or not all(
                isinstance(v, dict) and "q" in v and "a" in v for v in vqa
            ):
                raise SchemaMismatch(f"{where}: vqa entries need 'q' and 'a' fields")
            converted["vqa"] = [{"q": str(v["q"]), "a": str(v["a"])} for v in vqa]
        records.append(converted)
    return records


_CONVERTERS = {
    "fsc147": _convert_fsc147,
    "voc": _convert_voc,
    "omnicount": _convert_omnicount,
}


def convert_annotations(source_format: str, path) -> list[dict]:
    """Parse one source file into target-schema record dicts."""
    if source_format not in _CONVERTERS:
        raise ValueError(f"source_format must be one of {FORMATS}, got {source_format!r}")
    return _CONVERTERS[source_format](path)


def write_jsonl(records: list[dict], out_path) -> None:
    tmp = f"{out_path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    os.replace(tmp, out_path)
