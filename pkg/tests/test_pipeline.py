import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from cxr_regions.imagecore import BinaryMask, save_mask
from cxr_regions.pipeline import (
    CaseManifest,
    PipelineConfig,
    load_manifest,
    run_batch,
    run_pipeline,
)
from cxr_regions.template import AP_NAMES, LAT_NAMES


@pytest.fixture(scope="module")
def manifest(corpus_dir):
    return load_manifest(corpus_dir / "manifest.json")


def test_manifest_paths_resolve(manifest, corpus_dir):
    assert len(manifest) == 30
    first = manifest[0]
    assert first.case_id == "case000"
    assert first.ap_image == corpus_dir / "case000_AP.png" and first.ap_image.is_file()
    assert first.ap_detection is None


def test_manifest_list_form(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps([{"case_id": "x", "ap_image": "/abs/a.png"}]))
    (case,) = load_manifest(tmp_path / "m.json")
    assert case.ap_image == Path("/abs/a.png") and case.lat_mask is None


def test_single_case_ok(manifest, tmp_path):
    res = run_pipeline(manifest[3], PipelineConfig(), tmp_path)
    assert res.ok and res.error is None
    assert set(res.regions["AP"].regions) == set(AP_NAMES)
    assert set(res.regions["LAT"].regions) == set(LAT_NAMES)
    assert res.regions["AP"].transform.align_scale == res.regions["LAT"].transform.align_scale
    pngs = [o for o in res.outputs if o.endswith(".png") and "overlay" not in o]
    assert len(pngs) == 12
    assert sum("overlay" in o for o in res.outputs) == 2
    assert all((tmp_path / o).is_file() for o in res.outputs)
    doc = json.loads((tmp_path / "case003" / "AP_regions.json").read_text())
    assert doc["schema_version"] == 1 and doc["case_id"] == "case003"


def test_missing_lat_mask(manifest):
    res = run_pipeline(replace(manifest[0], lat_mask=None))
    assert res.status == "Failed" and res.error["type"] == "MissingInput"
    assert res.regions == {}
    res = run_pipeline(replace(manifest[0], lat_mask=Path("/nonexistent/mask.png")))
    assert res.error["type"] == "MissingInput" and res.error["stage"] == "load"


def test_empty_ap_mask_fails_at_verticalize(manifest, tmp_path):
    empty = tmp_path / "empty.png"
    save_mask(BinaryMask(np.zeros((192, 192), dtype=bool)), empty)
    res = run_pipeline(replace(manifest[0], ap_mask=empty))
    assert res.status == "Failed"
    assert res.error["stage"] == "verticalize" and res.error["type"] == "EmptyMask"


def test_dimension_mismatch(manifest, tmp_path):
    small = tmp_path / "small.png"
    save_mask(BinaryMask(np.ones((10, 10), dtype=bool)), small)
    res = run_pipeline(replace(manifest[0], ap_mask=small))
    assert res.error == {"stage": "load", "type": "DimensionMismatch", "message": res.error["message"]}


def _detection_file(tmp_path, name, bbox, conf, view="AP"):
    path = tmp_path / name
    path.write_text(json.dumps({"view": view, "bbox": bbox, "confidence": conf}))
    return path


def test_detection_used_when_confident(manifest, tmp_path):
    det = _detection_file(tmp_path, "det.json", [20, 20, 171, 171], 0.95)
    res = run_pipeline(replace(manifest[0], ap_detection=det))
    assert res.ok and not res.warnings
    # margin 0.15 of 152 px = 23 px, clamped at 0
    assert res.regions["AP"].transform.crop_offset == (0, 0)
    det = _detection_file(tmp_path, "det2.json", [60, 40, 171, 171], 0.95)
    res = run_pipeline(replace(manifest[0], ap_detection=det), PipelineConfig(margin=0.0))
    assert res.regions["AP"].transform.crop_offset == (60, 40)


def test_low_confidence_falls_back(manifest, tmp_path):
    det = _detection_file(tmp_path, "det.json", [60, 40, 171, 171], 0.5)
    res = run_pipeline(replace(manifest[0], ap_detection=det))
    assert res.ok and len(res.warnings) == 1 and "below" in res.warnings[0]
    assert res.to_json()["status"] == "Warning"
    ok = run_pipeline(manifest[0])
    assert res.regions["AP"].to_json("c") == ok.regions["AP"].to_json("c")


def test_spine_override(manifest):
    forced = run_pipeline(replace(manifest[0], spine_side_override="left"))
    assert forced.orientation.source.value == "Override" and forced.orientation.flipped
    cfg = run_pipeline(manifest[0], PipelineConfig(spine_side="right"))
    assert not cfg.orientation.flipped


def test_backmapped_corners_inside_canvas(manifest):
    for case in manifest[:6]:
        res = run_pipeline(case)
        for rs in res.regions.values():
            for pts in rs.backmapped_corners().values():
                assert (pts >= -0.5).all() and (pts <= 191.5).all()


def test_batch_isolation_and_parallel(manifest, tmp_path):
    broken = replace(manifest[1], lat_mask=None)
    cases = [manifest[2], broken, manifest[0]]
    serial = run_batch(cases, PipelineConfig(), tmp_path / "a")
    parallel = run_batch(cases, PipelineConfig(jobs=2), tmp_path / "b")
    assert [r.case_id for r in serial] == ["case000", "case001", "case002"]
    assert [r.status for r in serial] == ["Ok", "Failed", "Ok"]
    a = (tmp_path / "a" / "results.json").read_bytes()
    b = (tmp_path / "b" / "results.json").read_bytes()
    assert a == b
    assert [r.to_json() for r in serial] == [r.to_json() for r in parallel]
    alone = run_pipeline(manifest[2]).to_json()
    assert serial[2].to_json()["regions"] == alone["regions"]
    assert not (tmp_path / "a" / "case001").exists()


def test_case_manifest_from_json_absolute(tmp_path):
    case = CaseManifest.from_json({"case_id": 7, "ap_mask": str(tmp_path / "m.png")}, Path("/elsewhere"))
    assert case.case_id == "7" and case.ap_mask == tmp_path / "m.png"
