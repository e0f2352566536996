"""Defect recognition and road-marking refinement over street images.

Crack recognition runs in four stages: plate anonymization, detection,
per-detection segmentation, and mask placement back into full-image
coordinates.  Marking refinement projects image and prediction to a
bird's-eye view, traces marking contours there, keeps the ones the
prediction covers well enough, and maps them back.

The neural detector/segmenter seams are plain interfaces; bundled
intensity-threshold fallbacks keep the whole pipeline runnable and
deterministic without any trained weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Protocol, runtime_checkable

import numpy as np

from .geometry import (
    BoundingBox,
    Contour,
    Homography,
    InvalidGeometryError,
    Mask,
    Point2,
    Polygon,
    apply_homography,
    connected_components,
    contour_to_mask,
    overlap_ratio,
    polygon_to_bbox,
    rasterize_polygon,
    trace_contours,
    warp_mask,
)
from .images import otsu_threshold, to_grayscale, warp_image


class PipelineError(RuntimeError):
    """A processing stage violated its contract for one image."""


class DefectClass(IntEnum):
    """Road defect taxonomy; label 0 is reserved for background."""

    BACKGROUND = 0
    KERB_CRACKING = 1
    ROAD_CROCODILE = 2
    ROAD_LONGITUDINAL = 3
    ROAD_TRANSVERSE = 4
    ROAD_BLOCK = 5
    SEALED_CRACK = 6

    @property
    def label(self) -> str:
        return _CLASS_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "DefectClass":
        try:
            return _LABEL_TO_CLASS[label]
        except KeyError:
            raise ValueError(f"unknown defect class label: {label!r}") from None


_CLASS_LABELS = {
    DefectClass.BACKGROUND: "background",
    DefectClass.KERB_CRACKING: "Kerb_Cracking",
    DefectClass.ROAD_CROCODILE: "Road_Crocodile",
    DefectClass.ROAD_LONGITUDINAL: "Road_Longitudinal",
    DefectClass.ROAD_TRANSVERSE: "Road_Transverse",
    DefectClass.ROAD_BLOCK: "Road_Block",
    DefectClass.SEALED_CRACK: "Sealed_Crack",
}
_LABEL_TO_CLASS = {v: k for k, v in _CLASS_LABELS.items()}


@dataclass(frozen=True)
class Detection:
    """One detected defect: box, class and confidence."""

    bbox: BoundingBox
    defect_class: DefectClass
    confidence: float

    def __post_init__(self):
        if self.defect_class == DefectClass.BACKGROUND:
            raise ValueError("detections cannot carry the background class")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")


@runtime_checkable
class Detector(Protocol):
    def detect(self, image: np.ndarray) -> list[Detection]: ...


@runtime_checkable
class Segmenter(Protocol):
    def segment(self, crop: np.ndarray) -> Mask: ...


@runtime_checkable
class MarkingSegmenter(Protocol):
    def segment(self, image: np.ndarray) -> Mask: ...


@runtime_checkable
class PlateDetector(Protocol):
    def detect_plates(self, image: np.ndarray) -> list[BoundingBox]: ...


class NullPlateDetector:
    """Stub plate detector: the real anonymizer model is an external system."""

    def detect_plates(self, image: np.ndarray) -> list[BoundingBox]:
        return []


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for one camera rig / processing run.

    overlap_threshold is the keep/drop bar for marking contours; roi is the
    static road trapezoid in street-view coordinates; bev_homography maps
    street view to bird's-eye view.
    """

    overlap_threshold: float
    roi: Polygon
    bev_homography: Homography
    fallback_intensity_threshold: float = 70.0
    min_component_area: int = 60
    marking_intensity_threshold: float = 220.0

    def __post_init__(self):
        if not 0.0 < self.overlap_threshold <= 1.0:
            raise ValueError(
                f"overlap_threshold must be in (0, 1], got {self.overlap_threshold}"
            )
        if self.min_component_area < 1:
            raise ValueError("min_component_area must be >= 1")


@dataclass(frozen=True)
class ScoredContour:
    """A traced marking contour in original-image coordinates with its coverage."""

    contour: Contour
    coverage: float
    kept: bool


@dataclass(frozen=True)
class MarkingResult:
    contours: tuple[ScoredContour, ...]

    def kept_contours(self) -> list[ScoredContour]:
        return [c for c in self.contours if c.kept]


@dataclass(frozen=True)
class DefectPayload:
    """One defect ready for persistence: class, box, full-image mask, geo."""

    defect_class: DefectClass
    bbox: BoundingBox
    mask: Mask
    confidence: float
    lat: float
    lon: float


def _box_to_pixel_range(box: BoundingBox, width: int, height: int):
    """Columns/rows whose pixel centers fall inside the box, clipped."""
    c0 = max(0, int(math.ceil(box.x_min - 0.5)))
    c1 = min(width, int(math.ceil(box.x_max - 0.5)))
    r0 = max(0, int(math.ceil(box.y_min - 0.5)))
    r1 = min(height, int(math.ceil(box.y_max - 0.5)))
    return c0, c1, r0, r1


def anonymize(image: np.ndarray, plate_boxes: list[BoundingBox]) -> np.ndarray:
    """Blank license plate regions with a solid fill.

    Boxes may extend past the borders; only the intersection is filled.
    Pixels outside every box are byte-identical to the input.
    """
    out = np.array(image, copy=True)
    height, width = out.shape[:2]
    for box in plate_boxes:
        c0, c1, r0, r1 = _box_to_pixel_range(box, width, height)
        if c1 > c0 and r1 > r0:
            out[r0:r1, c0:c1] = 0
    return out


def annotation_to_detections(
    polygons: list[tuple[Polygon, DefectClass]],
) -> list[tuple[BoundingBox, DefectClass]]:
    """Convert labelled polygons to their minimal covering boxes, order kept."""
    out = []
    for poly, cls in polygons:
        if cls == DefectClass.BACKGROUND:
            raise ValueError("annotation polygons cannot carry the background class")
        out.append((polygon_to_bbox(poly), cls))
    return out


def parse_annotation(doc: dict, label_map: dict[str, str] | None = None):
    """Read one annotation document: {image, polygons: [{class, points}]}.

    label_map optionally renames incoming class strings to taxonomy labels.
    Returns (image name, list of (Polygon, DefectClass)).
    """
    try:
        name = doc["image"]
        raw = doc["polygons"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed annotation document: {exc}") from exc
    entries = []
    for item in raw:
        label = item["class"]
        if label_map:
            label = label_map.get(label, label)
        cls = DefectClass.from_label(label)
        poly = Polygon([(float(x), float(y)) for x, y in item["points"]])
        entries.append((poly, cls))
    return name, entries


def fallback_detect(
    image: np.ndarray,
    intensity_threshold: float = 70.0,
    min_component_area: int = 60,
) -> list[Detection]:
    """Classical stand-in for the trained crack detector.

    Dark pixels below the intensity threshold are grouped into 8-connected
    components; each component of sufficient area becomes a detection.
    Class follows the box aspect ratio (wide -> transverse, tall ->
    longitudinal, else block); confidence is the component fill fraction of
    its box.  Results are sorted by x_min then y_min, so the output is
    independent of scanning order.
    """
    gray = to_grayscale(image)
    fg = (gray < intensity_threshold).astype(np.uint8)
    if not fg.any():
        return []
    labels, count = connected_components(Mask(fg), connectivity=8)
    detections = []
    for idx in range(1, count + 1):
        rows, cols = np.nonzero(labels == idx)
        area = rows.size
        if area < min_component_area:
            continue
        c0, c1 = int(cols.min()), int(cols.max()) + 1
        r0, r1 = int(rows.min()), int(rows.max()) + 1
        w, h = c1 - c0, r1 - r0
        if w / h >= 3.0:
            cls = DefectClass.ROAD_TRANSVERSE
        elif h / w >= 3.0:
            cls = DefectClass.ROAD_LONGITUDINAL
        else:
            cls = DefectClass.ROAD_BLOCK
        detections.append(
            Detection(
                bbox=BoundingBox(float(c0), float(r0), float(c1), float(r1)),
                defect_class=cls,
                confidence=area / (w * h),
            )
        )
    detections.sort(key=lambda d: (d.bbox.x_min, d.bbox.y_min))
    return detections


@dataclass(frozen=True)
class FallbackDetector:
    """Detector seam adapter around fallback_detect."""

    intensity_threshold: float = 70.0
    min_component_area: int = 60

    def detect(self, image: np.ndarray) -> list[Detection]:
        return fallback_detect(image, self.intensity_threshold, self.min_component_area)


@dataclass(frozen=True)
class FallbackSegmenter:
    """Crack segmenter fallback: dark pixels of the crop are foreground."""

    intensity_threshold: float = 70.0

    def segment(self, crop: np.ndarray) -> Mask:
        gray = to_grayscale(crop)
        return Mask((gray < self.intensity_threshold).astype(np.uint8))


@dataclass(frozen=True)
class FallbackMarkingSegmenter:
    """Marking segmenter fallback: bright pixels are marking class 1."""

    intensity_threshold: float = 220.0

    def segment(self, image: np.ndarray) -> Mask:
        gray = to_grayscale(image)
        return Mask((gray >= self.intensity_threshold).astype(np.uint8))


def segment_defect(image: np.ndarray, detection: Detection, segmenter: Segmenter) -> Mask:
    """Segment one detection and place the result into full-image coordinates.

    The crop spans whole pixels covering the box.  All pixels outside the
    box region stay 0.
    """
    height, width = image.shape[:2]
    bbox = detection.bbox
    x0, y0 = int(math.floor(bbox.x_min)), int(math.floor(bbox.y_min))
    x1, y1 = int(math.ceil(bbox.x_max)), int(math.ceil(bbox.y_max))
    if x0 < 0 or y0 < 0 or x1 > width or y1 > height:
        raise PipelineError(f"detection box {bbox} exceeds image bounds {width}x{height}")
    crop = image[y0:y1, x0:x1]
    crop_mask = segmenter.segment(crop)
    if (crop_mask.width, crop_mask.height) != (x1 - x0, y1 - y0):
        raise PipelineError(
            f"segmenter returned {crop_mask.width}x{crop_mask.height} "
            f"for a {x1 - x0}x{y1 - y0} crop"
        )
    full = np.zeros((height, width), dtype=np.uint8)
    full[y0:y1, x0:x1] = crop_mask.pixels
    return Mask(full)


def parse_markings(image: np.ndarray, pred: Mask, cfg: PipelineConfig) -> MarkingResult:
    """Refine a marking prediction map against low-level contours.

    Image and prediction are restricted to the road ROI and projected to
    bird's-eye view.  The BEV image is binarized at an Otsu threshold
    computed over the visible ROI (markings are bright), contours are
    traced, and each contour region is scored by the fraction the
    prediction covers.  Contours at or above the overlap threshold are
    kept.  All contours come back in original-image coordinates.
    """
    height, width = image.shape[:2]
    if (pred.width, pred.height) != (width, height):
        raise ValueError(
            f"prediction dims {pred.width}x{pred.height} differ from image {width}x{height}"
        )
    roi_mask = rasterize_polygon(cfg.roi, width, height)
    roi = roi_mask.pixels != 0

    gray = to_grayscale(image)
    gray[~roi] = 0.0
    pred_roi = np.where(roi, pred.pixels, 0).astype(np.uint8)

    h = cfg.bev_homography
    bev_gray = warp_image(gray, h, width, height)
    bev_pred = warp_mask(Mask(pred_roi), h, width, height)
    bev_roi = warp_mask(roi_mask, h, width, height).pixels != 0

    scored: list[ScoredContour] = []
    if bev_roi.any():
        threshold = otsu_threshold(bev_gray[bev_roi])
        marking_bin = Mask(((bev_gray > threshold) & bev_roi).astype(np.uint8))
        pred_bin = Mask((bev_pred.pixels != 0).astype(np.uint8))
        h_inv = h.inverse()
        for contour in trace_contours(marking_bin):
            region = contour_to_mask(contour, width, height)
            coverage = overlap_ratio(region, pred_bin)
            kept = coverage >= cfg.overlap_threshold
            mapped = Contour([apply_homography(h_inv, p) for p in contour.points])
            scored.append(ScoredContour(contour=mapped, coverage=coverage, kept=kept))
    return MarkingResult(contours=tuple(scored))


def process_image(
    image: np.ndarray,
    lat: float,
    lon: float,
    detector: Detector,
    segmenter: Segmenter,
    marking_segmenter: MarkingSegmenter,
    cfg: PipelineConfig,
    plate_detector: PlateDetector | None = None,
) -> tuple[list[DefectPayload], MarkingResult]:
    """Run the full per-image flow: anonymize, detect, segment, parse markings."""
    plates = plate_detector.detect_plates(image) if plate_detector else []
    anon = anonymize(image, plates)
    payloads = []
    for det in detector.detect(anon):
        mask = segment_defect(anon, det, segmenter)
        payloads.append(
            DefectPayload(
                defect_class=det.defect_class,
                bbox=det.bbox,
                mask=mask,
                confidence=det.confidence,
                lat=lat,
                lon=lon,
            )
        )
    marking_pred = marking_segmenter.segment(anon)
    markings = parse_markings(anon, marking_pred, cfg)
    return payloads, markings


def default_models(cfg: PipelineConfig):
    """The bundled fallback detector/segmenter triple for a config."""
    return (
        FallbackDetector(cfg.fallback_intensity_threshold, cfg.min_component_area),
        FallbackSegmenter(cfg.fallback_intensity_threshold),
        FallbackMarkingSegmenter(cfg.marking_intensity_threshold),
    )


def full_image_roi(width: int, height: int) -> Polygon:
    return Polygon([(0.0, 0.0), (float(width), 0.0), (float(width), float(height)), (0.0, float(height))])
