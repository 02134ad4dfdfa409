"""Annotation conversion into the evaluation JSONL schema."""

import json

import pytest

from priorcount.metrics import read_annotations

from priorexport.cli import main
from priorexport.convert import convert_annotations, write_jsonl
from priorexport.errors import SchemaMismatch


def _voc_fixture(path, n_records=10):
    records = []
    for i in range(n_records):
        objects = []
        for j in range(1 + i % 3):
            label = ["person", "car", "dog"][j]
            for k in range(1 + (i + j) % 4):
                x0, y0 = 10 * k + j, 5 * k + i
                objects.append(
                    {
                        "name": label,
                        "bndbox": {"xmin": x0, "ymin": y0, "xmax": x0 + 8, "ymax": y0 + 6},
                    }
                )
        records.append({"image_id": f"voc_{i:03d}", "objects": objects})
    path.write_text(json.dumps(records))
    return records


def test_voc_counts_equal_box_cardinalities(tmp_path):
    src = tmp_path / "voc.json"
    raw = _voc_fixture(src)
    out = convert_annotations("voc", src)
    assert len(out) == 10

    jsonl = tmp_path / "ann.jsonl"
    write_jsonl(out, jsonl)
    parsed = read_annotations(jsonl)
    assert len(parsed) == 10
    by_id = {rec.image_id: rec for rec in parsed}
    for raw_rec in raw:
        boxes_per_label = {}
        for obj in raw_rec["objects"]:
            boxes_per_label[obj["name"]] = boxes_per_label.get(obj["name"], 0) + 1
        rec = by_id[raw_rec["image_id"]]
        assert {o.label: o.count for o in rec.objects} == boxes_per_label
        for o in rec.objects:
            assert o.points is None
            assert o.boxes is not None and len(o.boxes) == o.count
        assert rec.domain == "voc"


def test_voc_box_coordinates_reordered(tmp_path):
    src = tmp_path / "voc.json"
    src.write_text(
        json.dumps(
            [
                {
                    "image_id": "one",
                    "objects": [
                        {"name": "cat", "bndbox": {"xmin": 3, "ymin": 7, "xmax": 13, "ymax": 17}}
                    ],
                }
            ]
        )
    )
    (rec,) = convert_annotations("voc", src)
    assert rec["objects"][0]["boxes"] == [[7.0, 3.0, 17.0, 13.0]]


def test_voc_missing_bndbox_key(tmp_path):
    src = tmp_path / "voc.json"
    src.write_text(
        json.dumps(
            [{"image_id": "one", "objects": [{"name": "cat", "bndbox": {"xmin": 1}}]}]
        )
    )
    with pytest.raises(SchemaMismatch):
        convert_annotations("voc", src)


def test_fsc_points_become_counts(tmp_path):
    src = tmp_path / "fsc.json"
    src.write_text(
        json.dumps(
            {
                "img_b": {"class": "apple", "points": [[1, 2], [3, 4], [5, 6]]},
                "img_a": {"class": "pear", "points": [[9.5, 0.5]]},
            }
        )
    )
    out = convert_annotations("fsc147", src)
    assert [r["image_id"] for r in out] == ["img_a", "img_b"]
    assert out[1]["objects"][0] == {
        "label": "apple",
        "count": 3,
        "points": [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
    }
    jsonl = tmp_path / "ann.jsonl"
    write_jsonl(out, jsonl)
    parsed = read_annotations(jsonl)
    assert parsed[0].objects[0].count == 1
    assert parsed[0].objects[0].boxes is None


def test_omnicount_passthrough_and_vqa(tmp_path):
    src = tmp_path / "omni.jsonl"
    rec = {
        "image_id": "om_01",
        "domain": "aerial",
        "objects": [{"label": "boat", "count": 2, "points": [[1, 1], [2, 2]]}],
        "vqa": [{"q": "how many boats?", "a": "2"}],
    }
    src.write_text(json.dumps(rec) + "\n")
    out = convert_annotations("omnicount", src)
    assert out[0]["vqa"] == [{"q": "how many boats?", "a": "2"}]
    jsonl = tmp_path / "ann.jsonl"
    write_jsonl(out, jsonl)
    assert read_annotations(jsonl)[0].vqa == (("how many boats?", "2"),)


def test_omnicount_malformed_vqa(tmp_path):
    src = tmp_path / "omni.json"
    src.write_text(
        json.dumps(
            [
                {
                    "image_id": "om_03",
                    "domain": "aerial",
                    "objects": [{"label": "boat", "count": 0}],
                    "vqa": [["how many?", "0"]],
                }
            ]
        )
    )
    with pytest.raises(SchemaMismatch):
        convert_annotations("omnicount", src)


def test_omnicount_inconsistent_count(tmp_path):
    src = tmp_path / "omni.json"
    src.write_text(
        json.dumps(
            [
                {
                    "image_id": "om_02",
                    "domain": "field",
                    "objects": [{"label": "cow", "count": 3, "points": [[1, 1]]}],
                }
            ]
        )
    )
    with pytest.raises(SchemaMismatch) as err:
        convert_annotations("omnicount", src)
    assert "1 points but count=3" in str(err.value)


def test_unknown_format():
    with pytest.raises(ValueError):
        convert_annotations("coco", "whatever.json")


def test_cli_convert_end_to_end(tmp_path, capsys):
    src = tmp_path / "voc.json"
    _voc_fixture(src, n_records=3)
    out = tmp_path / "out.jsonl"
    code = main(["convert", "--format", "voc", "--in", str(src), "--out", str(out)])
    assert code == 0
    assert capsys.readouterr().out.strip() == str(out)
    assert len(read_annotations(out)) == 3


def test_cli_convert_schema_error_exit(tmp_path, capsys):
    src = tmp_path / "bad.json"
    src.write_text("[{\"image_id\": \"x\"}]")
    code = main(["convert", "--format", "voc", "--in", str(src), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_cli_missing_input_exit(tmp_path, capsys):
    code = main(
        ["convert", "--format", "voc", "--in", str(tmp_path / "nope.json"), "--out", "o"]
    )
    assert code == 2
