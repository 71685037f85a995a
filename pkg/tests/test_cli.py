import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cxr_regions.cli import build_config, build_parser, main
from cxr_regions.imagecore import BinaryMask, GrayImage, load_image, load_mask, save_image, save_mask


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_unknown_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"clip_limit": 3.0, "tiles": "4x2", "margin": 0.2}))
    args = build_parser().parse_args(["phantom", "--config", str(cfg), "--margin", "0.05"])
    config = build_config(args)
    assert config.clip_limit == 3.0 and config.tiles == (4, 2) and config.margin == 0.05
    assert config.confidence_threshold == 0.7 and config.resize_metrics == (256, 256)


@pytest.mark.parametrize(
    "content",
    ['{"nope": 1}', "not json", '{"jobs": 0}', '{"tiles": [0, 3]}', '{"spine_side": "up"}'],
)
def test_bad_config_exits_2(tmp_path, content, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(content)
    with pytest.raises(SystemExit) as exc:
        main(["phantom", "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
    assert exc.value.code == 2


def test_bad_tiles_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["phantom", "--tiles", "8by8"])
    assert exc.value.code == 2


def test_evaluate_identical(tmp_path, capsys):
    bits = np.zeros((40, 30), dtype=bool)
    bits[5:30, 4:25] = True
    save_mask(BinaryMask(bits), tmp_path / "p.png")
    save_mask(BinaryMask(bits), tmp_path / "r.png")
    code, out = _run(["evaluate", tmp_path / "p.png", tmp_path / "r.png", "--out-dir", tmp_path / "o"], capsys)
    assert code == 0
    report = json.loads(out.out)
    assert report["cases"][0]["dice"] == 1.0 and report["mean"]["asd"] == 0.0
    assert json.loads((tmp_path / "o" / "metrics.json").read_text()) == report
    rows = list(csv.reader(open(tmp_path / "o" / "metrics.csv")))
    assert rows[0] == ["case", "DICE (%)", "PRC (%)", "RCL (%)", "ASD (px)"]
    assert rows[-1] == ["mean ± std", "100.00 ± 0.00", "100.00 ± 0.00", "100.00 ± 0.00", "0.00 ± 0.00"]


def test_evaluate_directories_and_resize(tmp_path, capsys):
    (tmp_path / "pred").mkdir()
    (tmp_path / "ref").mkdir()
    a = np.zeros((16, 16), dtype=bool)
    a[2:10, 2:10] = True
    for name, shift in (("x.png", 0), ("y.png", 2)):
        save_mask(BinaryMask(np.roll(a, shift, axis=1)), tmp_path / "pred" / name)
        save_mask(BinaryMask(a), tmp_path / "ref" / name)
    argv = ["evaluate", tmp_path / "pred", tmp_path / "ref", "--resize-metrics", "16x16", "--out-dir", tmp_path]
    code, out = _run(argv, capsys)
    report = json.loads(out.out)
    assert code == 0 and [c["case"] for c in report["cases"]] == ["x", "y"]
    assert report["cases"][1]["dice"] == 0.75 and report["resize"] == [16, 16]


def test_evaluate_bad_inputs(tmp_path, capsys):
    code, out = _run(["evaluate", tmp_path / "a.png", tmp_path / "b.png"], capsys)
    assert code == 2 and "error" in out.err


def test_enhance_and_znorm(tmp_path, capsys):
    rng = np.random.default_rng(0)
    save_image(GrayImage(rng.integers(90, 140, (32, 32), dtype=np.uint8)), tmp_path / "in.png")
    code, _ = _run(["enhance", tmp_path / "in.png", tmp_path / "out.png", "--tiles", "2x2"], capsys)
    assert code == 0 and load_image(tmp_path / "out.png").shape == (32, 32)
    code, _ = _run(["enhance", tmp_path / "in.png", tmp_path / "z.npy", "--znorm"], capsys)
    z = np.load(tmp_path / "z.npy")
    assert code == 0 and abs(z.mean()) < 1e-6
    code, out = _run(["enhance", tmp_path / "missing.png", tmp_path / "o.png"], capsys)
    assert code == 1 and "FileNotFoundError" in out.err


def test_crop_with_detection_and_mask(tmp_path, capsys):
    save_image(GrayImage(np.zeros((64, 64), dtype=np.uint8)), tmp_path / "img.png")
    (tmp_path / "det.json").write_text(json.dumps({"view": "AP", "bbox": [10, 10, 19, 19], "confidence": 0.9}))
    argv = ["crop", tmp_path / "img.png", tmp_path / "c.png", "--view", "AP", "--detection", tmp_path / "det.json"]
    code, out = _run(argv + ["--margin", "0"], capsys)
    assert code == 0 and json.loads(out.out) == {"crop_offset": [10, 10], "size": [10, 10]}
    code, out = _run(argv + ["--confidence-threshold", "0.95"], capsys)
    assert code == 1 and "LowConfidence" in out.err
    bits = np.zeros((64, 64), dtype=bool)
    bits[5:15, 20:40] = True
    save_mask(BinaryMask(bits), tmp_path / "m.png")
    argv = ["crop", tmp_path / "img.png", tmp_path / "c.png", "--view", "AP", "--mask", tmp_path / "m.png"]
    code, out = _run(argv + ["--margin", "0"], capsys)
    assert json.loads(out.out) == {"crop_offset": [20, 5], "size": [20, 10]}
    code, _ = _run(["crop", tmp_path / "img.png", tmp_path / "c.png", "--view", "AP"], capsys)
    assert code == 2


def test_orient_and_regions(corpus_dir, tmp_path, capsys):
    img, mask = corpus_dir / "case000_LAT.png", corpus_dir / "case000_LAT_mask.png"
    code, out = _run(["orient", img, mask, "--out-dir", tmp_path / "o"], capsys)
    outcome = json.loads(out.out)
    assert code == 0 and outcome["source"] == "Heuristic"
    assert outcome["side"] == json.loads((corpus_dir / "case000_LAT_truth.json").read_text())["spine_side"]
    code, out = _run(["orient", img, mask, "--out-dir", tmp_path / "p", "--spine-side", "left"], capsys)
    assert json.loads(out.out)["flipped"] and json.loads(out.out)["score"] == 1.0
    assert load_mask(tmp_path / "p" / mask.name) == BinaryMask(load_mask(mask).bits[:, ::-1])

    ap_img, ap_mask = corpus_dir / "case000_AP.png", corpus_dir / "case000_AP_mask.png"
    argv = ["regions", ap_mask, "--view", "AP", "--image", ap_img, "--verticalize", "--case-id", "c0"]
    code, out = _run(argv + ["--out-dir", tmp_path / "r"], capsys)
    doc = json.loads(out.out)
    assert code == 0 and doc["case_id"] == "c0" and len(doc["regions"]) == 8
    assert len(list((tmp_path / "r").glob("case000_AP_AP*.png"))) == 8
    assert (tmp_path / "r" / "case000_AP_overlay.png").is_file()
    code, out = _run(["regions", mask, "--view", "LAT", "--out-dir", tmp_path / "r"], capsys)
    assert code == 0 and list(json.loads(out.out)["regions"]) == ["LATULS", "LATMLS", "LATLLS", "LATMM"]


def test_phantom_and_run(tmp_path, capsys):
    code, out = _run(["phantom", "--n", "3", "--seed", "5", "--out-dir", tmp_path / "ph"], capsys)
    assert code == 0 and out.out.strip().endswith("manifest.json")
    manifest = tmp_path / "ph" / "manifest.json"
    code, out = _run(["run", manifest, "--out-dir", tmp_path / "out", "--jobs", "2"], capsys)
    assert code == 0 and out.out.count(": Ok") == 3
    results = json.loads((tmp_path / "out" / "results.json").read_text())
    assert [r["status"] for r in results["results"]] == ["Ok"] * 3


def test_run_with_failure_exits_1(tmp_path, capsys):
    main(["phantom", "--n", "2", "--out-dir", str(tmp_path / "ph")])
    (tmp_path / "ph" / "case001_LAT_mask.png").unlink()
    code, out = _run(["run", tmp_path / "ph" / "manifest.json", "--out-dir", tmp_path / "out"], capsys)
    assert code == 1 and "case001: Failed [load] MissingInput" in out.out
    assert "case000: Ok" in out.out


def test_run_bad_manifest_exits_2(tmp_path, capsys):
    (tmp_path / "m.json").write_text("{}")
    code, _ = _run(["run", tmp_path / "m.json"], capsys)
    assert code == 2
    code, _ = _run(["run", tmp_path / "absent.json"], capsys)
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cxr_regions", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "evaluate" in proc.stdout
