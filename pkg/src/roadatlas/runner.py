"""Batch processing: run the pipeline over image files and persist results.

Per-image failures (undecodable files, missing geo, stage errors) are
collected, never fatal for the batch.  With a worker pool the compute
stage runs concurrently but results are persisted in input order, so the
stored outcome does not depend on the worker count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .datastore import Datastore, DefectRecord, GeoPoint, ImageAsset, MarkingRecord, utc_now
from .images import IMAGE_SUFFIXES, load_image
from .pipeline import (
    Detector,
    MarkingSegmenter,
    PipelineConfig,
    PlateDetector,
    Segmenter,
    anonymize,
    default_models,
    process_image,
)


@dataclass
class BatchSummary:
    processed: int = 0
    defects: int = 0
    markings: int = 0
    skipped: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def summary_line(self) -> str:
        return (
            f"processed={self.processed} defects={self.defects} "
            f"markings={self.markings} failures={len(self.failures)}"
        )


def find_images(directory: str | Path) -> list[Path]:
    """Image files of a directory in lexicographic filename order."""
    root = Path(directory)
    return sorted(
        (p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.name,
    )


def read_geo_sidecar(image_path: Path) -> GeoPoint | None:
    sidecar = image_path.with_suffix(".json")
    if not sidecar.exists():
        return None
    doc = json.loads(sidecar.read_text(encoding="utf-8"))
    return GeoPoint(float(doc["lat"]), float(doc["lon"]))


def _compute(path: Path, geo: GeoPoint, cfg, detector, segmenter, marking_segmenter, plate_detector):
    image = load_image(path)
    plates = plate_detector.detect_plates(image) if plate_detector else []
    anon = anonymize(image, plates)
    payloads, markings = process_image(
        anon, geo.lat, geo.lon, detector, segmenter, marking_segmenter, cfg
    )
    return anon, payloads, markings


def process_files(
    paths: list[Path],
    store: Datastore,
    cfg: PipelineConfig,
    *,
    detector: Detector | None = None,
    segmenter: Segmenter | None = None,
    marking_segmenter: MarkingSegmenter | None = None,
    plate_detector: PlateDetector | None = None,
    default_geo: GeoPoint | None = None,
    jobs: int = 1,
    skip_processed: bool = False,
    on_progress: Callable[[str, bool, str | None], None] | None = None,
    should_stop: Callable[[], bool] | None = None,
) -> BatchSummary:
    """Process images in order, persist results, report per-file outcomes."""
    if detector is None or segmenter is None or marking_segmenter is None:
        fb_detector, fb_segmenter, fb_marking = default_models(cfg)
        detector = detector or fb_detector
        segmenter = segmenter or fb_segmenter
        marking_segmenter = marking_segmenter or fb_marking

    summary = BatchSummary()
    pending: list[tuple[Path, GeoPoint] | tuple[Path, None]] = []
    for path in paths:
        if skip_processed and store.has_source(path.name):
            summary.skipped += 1
            continue
        geo = read_geo_sidecar(path) or default_geo
        pending.append((path, geo))

    def compute(item):
        path, geo = item
        if geo is None:
            return path, None, "missing geo sidecar and no default geo configured"
        try:
            anon, payloads, markings = _compute(
                path, geo, cfg, detector, segmenter, marking_segmenter, plate_detector
            )
            return path, (anon, payloads, markings, geo), None
        except Exception as exc:  # per-image isolation
            return path, None, f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(compute, pending))
    else:
        results = map(compute, pending)

    for path, outcome, reason in results:
        if should_stop and should_stop():
            raise InterruptedError("batch interrupted by shutdown")
        if outcome is None:
            summary.failures.append((path.name, reason))
            if on_progress:
                on_progress(path.name, False, reason)
            continue
        anon, payloads, markings, geo = outcome
        _persist(store, path.name, anon, payloads, markings, geo, summary)
        if on_progress:
            on_progress(path.name, True, None)
    return summary


def _persist(store, name, anon, payloads, markings, geo, summary):
    rel_path = store.save_image_file(anon, Path(name).stem)
    image_id = store.insert_image(
        ImageAsset(path=rel_path, captured_at=utc_now(), geo=geo, anonymized=True)
    )
    for payload in payloads:
        mask_path = store.save_mask(payload.mask)
        store.insert_defect(
            DefectRecord(
                image_id=image_id,
                defect_class=payload.defect_class,
                bbox=payload.bbox,
                mask_path=mask_path,
                confidence=payload.confidence,
                geo=GeoPoint(payload.lat, payload.lon),
            )
        )
        summary.defects += 1
    for scored in markings.kept_contours():
        store.insert_marking(
            MarkingRecord(image_id=image_id, contour=scored.contour, coverage=scored.coverage)
        )
        summary.markings += 1
    store.mark_source(name, image_id)
    summary.processed += 1
