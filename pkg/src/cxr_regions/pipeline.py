"""Per-case pipeline: enhance, crop, verticalize/orient, regions, align, write.

Segmentation masks are mandatory inputs (the models producing them live
elsewhere); detector boxes are optional and fall back to the mask box.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from PIL import Image

from . import enhance, imagecore, maskops, orientation, template
from .errors import CXRError, DimensionMismatch, MissingInput
from .imagecore import ViewKind

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    clip_limit: float = 2.0
    tiles: tuple[int, int] = (8, 8)
    epsilon: float = enhance.DEFAULT_EPSILON
    confidence_threshold: float = template.DEFAULT_CONFIDENCE_THRESHOLD
    margin: float = 0.15
    spine_side: str = "auto"
    resize_metrics: tuple[int, int] = (256, 256)
    jobs: int = 1
    write_crops: bool = True
    write_overlays: bool = True

    @property
    def clahe_params(self) -> enhance.ClaheParams:
        return enhance.ClaheParams(self.clip_limit, self.tiles[0], self.tiles[1])


@dataclass(frozen=True)
class CaseManifest:
    case_id: str
    ap_image: Optional[Path]
    lat_image: Optional[Path]
    ap_mask: Optional[Path]
    lat_mask: Optional[Path]
    ap_detection: Optional[Path] = None
    lat_detection: Optional[Path] = None
    spine_side_override: Optional[str] = None

    @classmethod
    def from_json(cls, obj: dict, base: Path | None = None) -> "CaseManifest":
        def path(key):
            val = obj.get(key)
            if val is None:
                return None
            p = Path(val)
            return p if p.is_absolute() or base is None else base / p

        return cls(
            case_id=str(obj["case_id"]),
            ap_image=path("ap_image"),
            lat_image=path("lat_image"),
            ap_mask=path("ap_mask"),
            lat_mask=path("lat_mask"),
            ap_detection=path("ap_detection"),
            lat_detection=path("lat_detection"),
            spine_side_override=obj.get("spine_side_override"),
        )


def load_manifest(path: str | os.PathLike) -> list[CaseManifest]:
    """Read a manifest: a JSON list of cases or ``{"cases": [...]}``.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    data = json.loads(path.read_text())
    if isinstance(data, dict):
        data = data["cases"]
    return [CaseManifest.from_json(c, path.parent) for c in data]


@dataclass
class PipelineResult:
    case_id: str
    status: str = "Ok"
    warnings: list[str] = field(default_factory=list)
    error: Optional[dict] = None
    regions: dict[str, template.RegionSet] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    orientation: Optional[orientation.OrientationOutcome] = None

    def to_json(self) -> dict:
        out = {
            "case_id": self.case_id,
            "status": "Warning" if self.status == "Ok" and self.warnings else self.status,
            "warnings": list(self.warnings),
            "error": self.error,
            "regions": {v: rs.to_json(self.case_id) for v, rs in sorted(self.regions.items())},
            "outputs": sorted(self.outputs),
        }
        if self.orientation is not None:
            o = self.orientation
            out["orientation"] = {
                "flipped": o.flipped,
                "side": o.detected.side.value,
                "score": o.detected.score,
                "source": o.source.value,
            }
        return out

    @property
    def ok(self) -> bool:
        return self.status == "Ok"


class _StageError(Exception):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(str(exc))
        self.stage = stage
        self.exc = exc


class _Stage:
    """Context manager tagging any exception with the stage it came from."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, _StageError):
            raise _StageError(self.name, exc) from exc
        return False


def _require(path: Optional[Path], what: str) -> Path:
    if path is None:
        raise MissingInput(f"manifest has no {what}")
    if not Path(path).is_file():
        raise MissingInput(f"{what} {path} does not exist")
    return Path(path)


def _detection(
    manifest_path: Optional[Path],
    mask: imagecore.BinaryMask,
    view: ViewKind,
    config: PipelineConfig,
    warnings: list[str],
) -> tuple[template.DetectionRecord, float]:
    """Detector box plus the margin to crop with, or the mask fallback."""
    if manifest_path is not None:
        det = template.DetectionRecord.from_json(json.loads(Path(manifest_path).read_text()))
        if det.confidence >= config.confidence_threshold:
            return det, config.margin
        warnings.append(
            f"{view.value} detection confidence {det.confidence:.3f} below "
            f"{config.confidence_threshold}; using mask bounding box"
        )
    if not mask.any():
        # nothing to crop to; later stages report the empty mask
        warnings.append(f"{view.value} mask is empty and no detection is usable; not cropping")
        full = imagecore.BBox(0, 0, mask.width - 1, mask.height - 1)
        return template.DetectionRecord(view, full, 1.0), 0.0
    return template.bbox_from_mask_fallback(mask, config.margin, view), 0.0


def _process_view(case: CaseManifest, view: ViewKind, config: PipelineConfig, res: PipelineResult):
    is_ap = view is ViewKind.AP
    tag = view.value
    with _Stage("load"):
        img_path = _require(case.ap_image if is_ap else case.lat_image, f"{tag} image")
        mask_path = _require(case.ap_mask if is_ap else case.lat_mask, f"{tag} mask")
        raw = imagecore.load_image(img_path)
        mask = imagecore.load_mask(mask_path)
        if raw.shape != mask.shape:
            raise DimensionMismatch(f"{tag} image {raw.shape} vs mask {mask.shape}")
    with _Stage("enhance"):
        enhanced = enhance.clahe(raw, config.clahe_params)
    with _Stage("crop"):
        det, margin = _detection(
            case.ap_detection if is_ap else case.lat_detection, mask, view, config, res.warnings
        )
        enhanced_c, offset = template.crop_to_detection(
            enhanced, det, margin, config.confidence_threshold, view
        )
        raw_c, _ = template.crop_to_detection(raw, det, margin, config.confidence_threshold, view)
        mask_c, _ = template.crop_to_detection(mask, det, margin, config.confidence_threshold, view)
    transform = template.Transform(crop_offset=offset, frame_size=(mask_c.width, mask_c.height))
    if is_ap:
        with _Stage("verticalize"):
            enhanced_c, mask_c, angle, center = template.verticalize_ap(enhanced_c, mask_c)
            transform.rotation_deg = angle
            transform.rotation_center = center
        with _Stage("regions"):
            rs = template.ap_regions(mask_c)
    else:
        with _Stage("orient"):
            override = case.spine_side_override or config.spine_side
            override = None if override in (None, "auto") else orientation.Side(override.capitalize())
            # the heuristic reads the un-enhanced crop
            _, _, outcome = orientation.correct_orientation(raw_c, mask_c, override)
            if outcome.flipped:
                enhanced_c, mask_c = orientation.hflip(enhanced_c), orientation.hflip(mask_c)
            transform.flipped = outcome.flipped
            res.orientation = outcome
        with _Stage("regions"):
            rs = template.lat_regions(maskops.keep_largest(mask_c, 1))
    rs.transform = transform
    return img_path, enhanced_c, rs


def run_pipeline(
    case: CaseManifest, config: PipelineConfig = PipelineConfig(), out_dir: str | os.PathLike | None = None
) -> PipelineResult:
    """Run one case end to end; errors end up in the result, never raised."""
    res = PipelineResult(case.case_id)
    try:
        ap_path, ap_img, ap_rs = _process_view(case, ViewKind.AP, config, res)
        lat_path, lat_img, lat_rs = _process_view(case, ViewKind.LAT, config, res)
        with _Stage("align"):
            template.align_views(ap_rs, lat_rs)
        res.regions = {"AP": ap_rs, "LAT": lat_rs}
        if out_dir is not None:
            with _Stage("write"):
                res.outputs = _write_case(
                    Path(out_dir), case.case_id, config,
                    [(ap_path, ap_img, ap_rs), (lat_path, lat_img, lat_rs)],
                )
    except _StageError as err:
        exc = err.exc
        res.status = "Failed"
        res.regions = {}
        res.error = {"stage": err.stage, "type": type(exc).__name__, "message": str(exc)}
        if not isinstance(exc, (CXRError, OSError, ValueError, KeyError)):
            log.exception("unexpected failure in case %s", case.case_id)
    return res


def _write_case(out_dir: Path, case_id: str, config: PipelineConfig, views) -> list[str]:
    case_dir = out_dir / case_id
    case_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for src_path, img, rs in views:
        stem = Path(src_path).stem
        name = f"{rs.view.value}_regions.json"
        (case_dir / name).write_text(json.dumps(rs.to_json(case_id), indent=2) + "\n")
        written.append(f"{case_id}/{name}")
        if config.write_crops:
            for acr, crop in template.extract_region_images(img, rs).items():
                fname = f"{stem}_{acr}.png"
                imagecore.save_image(crop, case_dir / fname)
                written.append(f"{case_id}/{fname}")
        if config.write_overlays:
            fname = f"{stem}_overlay.png"
            Image.fromarray(template.render_overlay(img, rs)).save(case_dir / fname)
            written.append(f"{case_id}/{fname}")
    return written


def _run_one(args):
    case, config, out_dir = args
    return run_pipeline(case, config, out_dir)


def run_batch(
    cases: list[CaseManifest], config: PipelineConfig = PipelineConfig(), out_dir: str | os.PathLike | None = None
) -> list[PipelineResult]:
    """Run every case, in parallel when ``config.jobs > 1``.

    Results come back sorted by case id. A summary ``results.json`` is
    written to ``out_dir`` when given.
    """
    jobs = [(c, config, out_dir) for c in cases]
    if config.jobs > 1 and len(cases) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r.case_id)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        summary = {
            "schema_version": SCHEMA_VERSION,
            "results": [r.to_json() for r in results],
        }
        (out / "results.json").write_text(json.dumps(summary, indent=2) + "\n")
    return results
