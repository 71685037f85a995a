"""Command-line entry point: ``cxr-regions <subcommand> ...``.

Exit codes: 0 success, 1 a case or operation failed, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import enhance, imagecore, metrics, orientation, pipeline, synthgen, template
from .errors import CXRError
from .imagecore import ViewKind

log = logging.getLogger("cxr_regions")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    pass


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        a, b = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if a < 1 or b < 1:
        raise argparse.ArgumentTypeError(f"dimensions must be positive, got {text!r}")
    return a, b


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline options")
    g.add_argument("--config", type=Path, help="JSON file with option defaults")
    g.add_argument("--jobs", type=int, help="worker processes for batch runs")
    g.add_argument("--clip-limit", type=float, help="CLAHE clip limit (default 2.0)")
    g.add_argument("--tiles", type=_pair, help="CLAHE tile grid WxH (default 8x8)")
    g.add_argument("--epsilon", type=float, help="z-normalization guard (default 1e-10)")
    g.add_argument("--confidence-threshold", type=float, help="detection threshold (default 0.7)")
    g.add_argument("--margin", type=float, help="crop margin as a fraction of box size")
    g.add_argument("--spine-side", choices=["auto", "left", "right"], help="LAT spine side")
    g.add_argument("--resize-metrics", type=_pair, help="metric resize WxH (default 256x256)")
    g.add_argument("--out-dir", type=Path, help="output directory")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


_CONFIG_KEYS = {f.name for f in dataclasses.fields(pipeline.PipelineConfig)}


def build_config(args: argparse.Namespace) -> pipeline.PipelineConfig:
    """Defaults, overridden by ``--config`` file values, overridden by flags."""
    values = {}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("tiles", "resize_metrics"):
            if key in loaded:
                val = loaded[key]
                loaded[key] = _pair(val) if isinstance(val, str) else tuple(val)
        values.update(loaded)
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    try:
        config = pipeline.PipelineConfig(**values)
        config.clahe_params
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if config.jobs < 1 or config.margin < 0 or not 0 <= config.confidence_threshold <= 1:
        raise ConfigError("jobs must be >= 1, margin >= 0, threshold in [0, 1]")
    if config.spine_side not in ("auto", "left", "right"):
        raise ConfigError(f"bad spine_side {config.spine_side!r}")
    return config


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _out_dir(args) -> Path:
    out = args.out_dir or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- subcommands --------------------------------------------------------------


def cmd_enhance(args, config) -> int:
    img = imagecore.load_image(args.image)
    if args.znorm:
        arr = enhance.znormalize(img, config.epsilon)
        np.save(args.output, arr)
    else:
        imagecore.save_image(enhance.clahe(img, config.clahe_params), args.output)
    return EXIT_OK


def cmd_crop(args, config) -> int:
    img = imagecore.load_image(args.image)
    view = ViewKind(args.view)
    if args.detection:
        det = template.DetectionRecord.from_json(json.loads(Path(args.detection).read_text()))
        margin = config.margin
    elif args.mask:
        det = template.bbox_from_mask_fallback(imagecore.load_mask(args.mask), config.margin, view)
        margin = 0.0
    else:
        raise ConfigError("crop needs --detection or --mask")
    out, offset = template.crop_to_detection(img, det, margin, config.confidence_threshold, view)
    imagecore.save_image(out, args.output)
    _emit({"crop_offset": list(offset), "size": [out.width, out.height]})
    return EXIT_OK


def cmd_orient(args, config) -> int:
    img = imagecore.load_image(args.image)
    mask = imagecore.load_mask(args.mask)
    override = None if config.spine_side == "auto" else orientation.Side(config.spine_side.capitalize())
    img, mask, outcome = orientation.correct_orientation(img, mask, override)
    out = _out_dir(args)
    imagecore.save_image(img, out / Path(args.image).name)
    imagecore.save_mask(mask, out / Path(args.mask).name)
    _emit(
        {
            "flipped": outcome.flipped,
            "side": outcome.detected.side.value,
            "score": outcome.detected.score,
            "source": outcome.source.value,
        }
    )
    return EXIT_OK


def cmd_regions(args, config) -> int:
    mask = imagecore.load_mask(args.mask)
    img = imagecore.load_image(args.image) if args.image else None
    view = ViewKind(args.view)
    transform = template.Transform(frame_size=(mask.width, mask.height))
    if view is ViewKind.AP:
        if args.verticalize:
            base = img if img is not None else imagecore.GrayImage(mask.bits.astype(np.uint8))
            base, mask, angle, center = template.verticalize_ap(base, mask)
            transform.rotation_deg, transform.rotation_center = angle, center
            img = base if img is not None else None
        rs = template.ap_regions(mask)
    else:
        rs = template.lat_regions(mask)
    rs.transform = transform
    case_id = args.case_id or Path(args.mask).stem
    out = _out_dir(args)
    (out / f"{view.value}_regions.json").write_text(json.dumps(rs.to_json(case_id), indent=2) + "\n")
    if img is not None:
        stem = Path(args.image).stem
        for name, crop in template.extract_region_images(img, rs).items():
            imagecore.save_image(crop, out / f"{stem}_{name}.png")
        Image.fromarray(template.render_overlay(img, rs)).save(out / f"{stem}_overlay.png")
    _emit(rs.to_json(case_id))
    return EXIT_OK


def _mask_pairs(pred: Path, ref: Path) -> list[tuple[str, Path, Path]]:
    if pred.is_dir() and ref.is_dir():
        pairs = []
        for p in sorted(pred.iterdir()):
            if p.suffix.lower() in (".png", ".pgm") and (ref / p.name).is_file():
                pairs.append((p.stem, p, ref / p.name))
        if not pairs:
            raise ConfigError(f"no matching mask files in {pred} and {ref}")
        return pairs
    if pred.is_file() and ref.is_file():
        return [(pred.stem, pred, ref)]
    raise ConfigError("evaluate needs two mask files or two directories")


def cmd_evaluate(args, config) -> int:
    rows = []
    for name, p, r in _mask_pairs(args.pred, args.ref):
        m = metrics.evaluate_case(imagecore.load_mask(p), imagecore.load_mask(r), config.resize_metrics)
        rows.append((name, m))
    summary = metrics.summarize([m for _, m in rows])
    report = {
        "schema_version": pipeline.SCHEMA_VERSION,
        "resize": list(config.resize_metrics),
        "cases": [{"case": n, **m.as_dict()} for n, m in rows],
        "mean": summary.mean,
        "std": summary.std,
    }
    out = _out_dir(args)
    (out / "metrics.json").write_text(json.dumps(report, indent=2) + "\n")
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case", "DICE (%)", "PRC (%)", "RCL (%)", "ASD (px)"])
        for n, m in rows:
            writer.writerow(
                [n, f"{100 * m.dice:.2f}", f"{100 * m.precision:.2f}", f"{100 * m.recall:.2f}", f"{m.asd:.2f}"]
            )
        table = metrics.format_table_row(summary)
        writer.writerow(["mean ± std", *(table[k] for k in metrics.METRIC_NAMES)])
    _emit(report)
    return EXIT_OK


def write_phantom_corpus(n: int, seed: int, out: Path) -> Path:
    """Write ``n`` AP/LAT phantom cases plus a run manifest; returns the manifest path."""
    out.mkdir(parents=True, exist_ok=True)
    cases = []
    for i, ((ap, ap_img, ap_t), (lat, lat_img, lat_t)) in enumerate(
        synthgen.paired_cases(synthgen.make_corpus(n, seed))
    ):
        cid = f"case{i:03d}"
        entry = {"case_id": cid}
        for tag, img, truth in (("ap", ap_img, ap_t), ("lat", lat_img, lat_t)):
            stem = f"{cid}_{tag.upper()}"
            imagecore.save_image(img, out / f"{stem}.png")
            imagecore.save_mask(truth.mask, out / f"{stem}_mask.png")
            (out / f"{stem}_truth.json").write_text(json.dumps(truth.to_json(), indent=2) + "\n")
            entry[f"{tag}_image"] = f"{stem}.png"
            entry[f"{tag}_mask"] = f"{stem}_mask.png"
        cases.append(entry)
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"cases": cases}, indent=2) + "\n")
    return manifest


def cmd_phantom(args, config) -> int:
    manifest = write_phantom_corpus(args.n, args.seed, _out_dir(args))
    print(manifest)
    return EXIT_OK


def cmd_run(args, config) -> int:
    try:
        cases = pipeline.load_manifest(args.manifest)
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad manifest {args.manifest}: {exc}") from exc
    results = pipeline.run_batch(cases, config, _out_dir(args))
    failed = [r for r in results if not r.ok]
    for r in results:
        line = f"{r.case_id}: {r.to_json()['status']}"
        if r.error:
            line += f" [{r.error['stage']}] {r.error['type']}: {r.error['message']}"
        print(line)
    return EXIT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="cxr-regions", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", parents=[common], help="CLAHE or z-normalize one image")
    p.add_argument("image", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--znorm", action="store_true", help="write z-normalized .npy instead")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("crop", parents=[common], help="crop an image to its lung box")
    p.add_argument("image", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--view", choices=["AP", "LAT"], required=True)
    p.add_argument("--detection", type=Path, help="detection JSON")
    p.add_argument("--mask", type=Path, help="mask used when no detection is given")
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("orient", parents=[common], help="put the LAT spine on the right")
    p.add_argument("image", type=Path)
    p.add_argument("mask", type=Path)
    p.set_defaults(func=cmd_orient)

    p = sub.add_parser("regions", parents=[common], help="template regions from a mask")
    p.add_argument("mask", type=Path)
    p.add_argument("--view", choices=["AP", "LAT"], required=True)
    p.add_argument("--image", type=Path, help="also write region crops and an overlay")
    p.add_argument("--verticalize", action="store_true", help="rotate AP lungs upright first")
    p.add_argument("--case-id")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("evaluate", parents=[common], help="segmentation metrics")
    p.add_argument("pred", type=Path, help="predicted mask file or directory")
    p.add_argument("ref", type=Path, help="reference mask file or directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("phantom", parents=[common], help="write a synthetic phantom corpus")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("run", parents=[common], help="full pipeline over a manifest")
    p.add_argument("manifest", type=Path)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        config = build_config(args)
    except ConfigError as exc:
        parser.error(str(exc))
    try:
        return args.func(args, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CXRError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
