"""File-backed persistence for images, defects, markings and validation state.

A single JSON document under the data root holds the record tables; bulk
pixel data (anonymized images, masks) lives beside it as PNG files.  All
mutations are serialized by a process-wide lock and flushed atomically, so
concurrent readers always see a consistent store and validation writes to
one record linearize.
"""

from __future__ import annotations

import csv
import io
import json
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import BoundingBox, Contour, Mask
from .pipeline import DefectClass


class DatastoreError(Exception):
    """Base class for persistence failures."""


class NotFoundError(DatastoreError):
    pass


class ConflictError(DatastoreError):
    pass


class ReferentialIntegrityError(DatastoreError):
    pass


class InvalidTransitionError(DatastoreError):
    pass


def utc_now() -> datetime:
    """Current UTC time at second precision, the store's timestamp grain."""
    return datetime.now(timezone.utc).replace(microsecond=0)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")


class ValidationStatus(Enum):
    UNCHECKED = "Unchecked"
    CONFIRMED = "Confirmed"
    REJECTED = "Rejected"


@dataclass(frozen=True, kw_only=True)
class ImageAsset:
    path: str
    captured_at: datetime
    geo: GeoPoint
    anonymized: bool
    id: str = ""


@dataclass(frozen=True, kw_only=True)
class DefectRecord:
    image_id: str
    defect_class: DefectClass
    bbox: BoundingBox
    mask_path: str
    confidence: float
    geo: GeoPoint
    status: ValidationStatus = ValidationStatus.UNCHECKED
    checked_by: str | None = None
    checked_at: datetime | None = None
    created_at: datetime | None = None
    id: str = ""

    def __post_init__(self):
        if self.defect_class == DefectClass.BACKGROUND:
            raise ValueError("defect records cannot carry the background class")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")


@dataclass(frozen=True, kw_only=True)
class MarkingRecord:
    image_id: str
    contour: Contour
    coverage: float
    status: ValidationStatus = ValidationStatus.UNCHECKED
    checked_by: str | None = None
    checked_at: datetime | None = None
    created_at: datetime | None = None
    id: str = ""

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError(f"coverage out of [0, 1]: {self.coverage}")


@dataclass(frozen=True)
class DefectFilter:
    """Conjunction of optional predicates for defect queries."""

    classes: frozenset[DefectClass] | None = None
    statuses: frozenset[ValidationStatus] | None = None
    geo_box: tuple[GeoPoint, GeoPoint] | None = None
    image_id: str | None = None

    def __post_init__(self):
        if self.geo_box is not None:
            lo, hi = self.geo_box
            if lo.lat > hi.lat or lo.lon > hi.lon:
                raise ValueError(f"geo_box is not well-ordered: {self.geo_box}")

    def matches(self, record: DefectRecord) -> bool:
        if self.classes is not None and record.defect_class not in self.classes:
            return False
        if self.statuses is not None and record.status not in self.statuses:
            return False
        if self.geo_box is not None:
            lo, hi = self.geo_box
            if not (lo.lat <= record.geo.lat <= hi.lat and lo.lon <= record.geo.lon <= hi.lon):
                return False
        if self.image_id is not None and record.image_id != self.image_id:
            return False
        return True


EXPORT_COLUMNS = [
    "id",
    "image_id",
    "class",
    "lat",
    "lon",
    "x_min",
    "y_min",
    "x_max",
    "y_max",
    "confidence",
    "status",
    "checked_by",
    "checked_at",
]


def _export_row(r: DefectRecord) -> dict:
    return {
        "id": r.id,
        "image_id": r.image_id,
        "class": r.defect_class.label,
        "lat": r.geo.lat,
        "lon": r.geo.lon,
        "x_min": r.bbox.x_min,
        "y_min": r.bbox.y_min,
        "x_max": r.bbox.x_max,
        "y_max": r.bbox.y_max,
        "confidence": r.confidence,
        "status": r.status.value,
        "checked_by": r.checked_by,
        "checked_at": format_timestamp(r.checked_at) if r.checked_at else None,
    }


def _image_to_dict(a: ImageAsset) -> dict:
    return {
        "id": a.id,
        "path": a.path,
        "captured_at": format_timestamp(a.captured_at),
        "lat": a.geo.lat,
        "lon": a.geo.lon,
        "anonymized": a.anonymized,
    }


def _image_from_dict(d: dict) -> ImageAsset:
    return ImageAsset(
        id=d["id"],
        path=d["path"],
        captured_at=parse_timestamp(d["captured_at"]),
        geo=GeoPoint(d["lat"], d["lon"]),
        anonymized=d["anonymized"],
    )


def _defect_to_dict(r: DefectRecord) -> dict:
    return {
        "id": r.id,
        "image_id": r.image_id,
        "class": r.defect_class.label,
        "bbox": [r.bbox.x_min, r.bbox.y_min, r.bbox.x_max, r.bbox.y_max],
        "mask_path": r.mask_path,
        "confidence": r.confidence,
        "lat": r.geo.lat,
        "lon": r.geo.lon,
        "status": r.status.value,
        "checked_by": r.checked_by,
        "checked_at": format_timestamp(r.checked_at) if r.checked_at else None,
        "created_at": format_timestamp(r.created_at),
    }


def _defect_from_dict(d: dict) -> DefectRecord:
    return DefectRecord(
        id=d["id"],
        image_id=d["image_id"],
        defect_class=DefectClass.from_label(d["class"]),
        bbox=BoundingBox(*d["bbox"]),
        mask_path=d["mask_path"],
        confidence=d["confidence"],
        geo=GeoPoint(d["lat"], d["lon"]),
        status=ValidationStatus(d["status"]),
        checked_by=d["checked_by"],
        checked_at=parse_timestamp(d["checked_at"]) if d["checked_at"] else None,
        created_at=parse_timestamp(d["created_at"]),
    )


def _marking_to_dict(r: MarkingRecord) -> dict:
    return {
        "id": r.id,
        "image_id": r.image_id,
        "contour": [[p.x, p.y] for p in r.contour.points],
        "coverage": r.coverage,
        "status": r.status.value,
        "checked_by": r.checked_by,
        "checked_at": format_timestamp(r.checked_at) if r.checked_at else None,
        "created_at": format_timestamp(r.created_at),
    }


def _marking_from_dict(d: dict) -> MarkingRecord:
    return MarkingRecord(
        id=d["id"],
        image_id=d["image_id"],
        contour=Contour([(x, y) for x, y in d["contour"]]),
        coverage=d["coverage"],
        status=ValidationStatus(d["status"]),
        checked_by=d["checked_by"],
        checked_at=parse_timestamp(d["checked_at"]) if d["checked_at"] else None,
        created_at=parse_timestamp(d["created_at"]),
    )


class Datastore:
    """Embedded store rooted at a single data directory."""

    STORE_FILE = "store.json"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "images").mkdir(exist_ok=True)
        (self.root / "masks").mkdir(exist_ok=True)
        self._lock = threading.RLock()
        self._images: dict[str, ImageAsset] = {}
        self._defects: dict[str, DefectRecord] = {}
        self._markings: dict[str, MarkingRecord] = {}
        self._jobs: dict[str, dict] = {}
        self._sources: dict[str, str] = {}
        self._load()

    # -- persistence ------------------------------------------------------

    def _load(self) -> None:
        path = self.root / self.STORE_FILE
        if not path.exists():
            return
        raw = json.loads(path.read_text(encoding="utf-8"))
        self._images = {d["id"]: _image_from_dict(d) for d in raw.get("images", [])}
        self._defects = {d["id"]: _defect_from_dict(d) for d in raw.get("defects", [])}
        self._markings = {d["id"]: _marking_from_dict(d) for d in raw.get("markings", [])}
        self._jobs = {d["id"]: d for d in raw.get("jobs", [])}
        self._sources = dict(raw.get("sources", {}))

    def _flush(self) -> None:
        payload = {
            "images": [_image_to_dict(a) for a in self._images.values()],
            "defects": [_defect_to_dict(r) for r in self._defects.values()],
            "markings": [_marking_to_dict(r) for r in self._markings.values()],
            "jobs": list(self._jobs.values()),
            "sources": self._sources,
        }
        tmp = self.root / (self.STORE_FILE + ".tmp")
        tmp.write_text(json.dumps(payload), encoding="utf-8")
        tmp.replace(self.root / self.STORE_FILE)

    # -- inserts ----------------------------------------------------------

    def insert_image(self, asset: ImageAsset) -> str:
        with self._lock:
            asset = replace(asset, id=asset.id or str(uuid.uuid4()))
            if asset.id in self._images:
                raise ConflictError(f"image id already exists: {asset.id}")
            if not asset.path:
                raise ValueError("image asset path must be non-empty")
            self._images[asset.id] = asset
            self._flush()
            return asset.id

    def insert_defect(self, record: DefectRecord) -> str:
        with self._lock:
            record = replace(
                record,
                id=record.id or str(uuid.uuid4()),
                created_at=record.created_at or utc_now(),
            )
            if record.id in self._defects:
                raise ConflictError(f"defect id already exists: {record.id}")
            if record.image_id not in self._images:
                raise ReferentialIntegrityError(f"unknown image_id: {record.image_id}")
            if record.status != ValidationStatus.UNCHECKED:
                raise ValueError("new defect records must start Unchecked")
            self._defects[record.id] = record
            self._flush()
            return record.id

    def insert_marking(self, record: MarkingRecord) -> str:
        with self._lock:
            record = replace(
                record,
                id=record.id or str(uuid.uuid4()),
                created_at=record.created_at or utc_now(),
            )
            if record.id in self._markings:
                raise ConflictError(f"marking id already exists: {record.id}")
            if record.image_id not in self._images:
                raise ReferentialIntegrityError(f"unknown image_id: {record.image_id}")
            if record.status != ValidationStatus.UNCHECKED:
                raise ValueError("new marking records must start Unchecked")
            self._markings[record.id] = record
            self._flush()
            return record.id

    # -- reads ------------------------------------------------------------

    def get_image(self, image_id: str) -> ImageAsset:
        with self._lock:
            try:
                return self._images[image_id]
            except KeyError:
                raise NotFoundError(f"unknown image id: {image_id}") from None

    def get_defect(self, defect_id: str) -> DefectRecord:
        with self._lock:
            try:
                return self._defects[defect_id]
            except KeyError:
                raise NotFoundError(f"unknown defect id: {defect_id}") from None

    def get_marking(self, marking_id: str) -> MarkingRecord:
        with self._lock:
            try:
                return self._markings[marking_id]
            except KeyError:
                raise NotFoundError(f"unknown marking id: {marking_id}") from None

    def image_by_path(self, path: str) -> ImageAsset | None:
        with self._lock:
            for asset in self._images.values():
                if asset.path == path:
                    return asset
            return None

    def query_defects(self, flt: DefectFilter | None = None) -> list[DefectRecord]:
        """Records matching every supplied predicate, sorted by created_at, id."""
        flt = flt or DefectFilter()
        with self._lock:
            hits = [r for r in self._defects.values() if flt.matches(r)]
        hits.sort(key=lambda r: (r.created_at, r.id))
        return hits

    def query_markings(self, image_id: str | None = None) -> list[MarkingRecord]:
        with self._lock:
            hits = [
                r for r in self._markings.values()
                if image_id is None or r.image_id == image_id
            ]
        hits.sort(key=lambda r: (r.created_at, r.id))
        return hits

    # -- validation -------------------------------------------------------

    def set_validation(self, defect_id: str, status: ValidationStatus, user: str) -> DefectRecord:
        """Confirm or reject a defect; repeats of an identical call are no-ops."""
        with self._lock:
            record = self.get_defect(defect_id)
            updated = self._validated(record, status, user)
            if updated is not record:
                self._defects[defect_id] = updated
                self._flush()
            return updated

    def set_marking_validation(self, marking_id: str, status: ValidationStatus, user: str) -> MarkingRecord:
        with self._lock:
            record = self.get_marking(marking_id)
            updated = self._validated(record, status, user)
            if updated is not record:
                self._markings[marking_id] = updated
                self._flush()
            return updated

    @staticmethod
    def _validated(record, status: ValidationStatus, user: str):
        if status == ValidationStatus.UNCHECKED:
            raise InvalidTransitionError("records cannot be reset to Unchecked")
        if not user:
            raise ValueError("validation requires a user name")
        if record.status == status and record.checked_by == user:
            return record
        return replace(record, status=status, checked_by=user, checked_at=utc_now())

    # -- export -----------------------------------------------------------

    def export_report(
        self,
        fmt: str,
        flt: DefectFilter | None = None,
        validated_only: bool = False,
    ) -> bytes:
        """Serialize matching defects as CSV or JSON, identical record sets."""
        records = self.query_defects(flt)
        if validated_only:
            records = [r for r in records if r.status != ValidationStatus.UNCHECKED]
        rows = [_export_row(r) for r in records]
        if fmt == "csv":
            buf = io.StringIO()
            writer = csv.DictWriter(buf, fieldnames=EXPORT_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
            return buf.getvalue().encode("utf-8")
        if fmt == "json":
            return json.dumps(rows).encode("utf-8")
        raise ValueError(f"unknown export format: {fmt!r}")

    # -- bulk files -------------------------------------------------------

    def save_mask(self, mask: Mask) -> str:
        """Store a binary mask as a lossless PNG; returns the relative path."""
        rel = f"masks/{uuid.uuid4()}.png"
        data = np.where(mask.pixels != 0, 255, 0).astype(np.uint8)
        Image.fromarray(data, mode="L").save(self.root / rel)
        return rel

    def save_image_file(self, image: np.ndarray, stem: str) -> str:
        """Store an (anonymized) image as PNG under images/; returns the path."""
        rel = f"images/{stem}-{uuid.uuid4().hex[:8]}.png"
        Image.fromarray(np.asarray(image, dtype=np.uint8)).save(self.root / rel)
        return rel

    def resolve(self, rel_path: str) -> Path:
        """Absolute path for a storage-relative path, confined to the root."""
        full = (self.root / rel_path).resolve()
        if not full.is_relative_to(self.root.resolve()):
            raise ValueError(f"path escapes the data root: {rel_path}")
        return full

    # -- processing jobs ----------------------------------------------------

    def save_job(self, job: dict) -> None:
        with self._lock:
            self._jobs[job["id"]] = dict(job)
            self._flush()

    def load_job(self, job_id: str) -> dict | None:
        with self._lock:
            job = self._jobs.get(job_id)
            return dict(job) if job else None

    def load_jobs(self) -> list[dict]:
        with self._lock:
            return [dict(j) for j in self._jobs.values()]

    # -- source bookkeeping (--skip-processed) ------------------------------

    def mark_source(self, name: str, image_id: str) -> None:
        with self._lock:
            self._sources[name] = image_id
            self._flush()

    def has_source(self, name: str) -> bool:
        with self._lock:
            return name in self._sources

    def source_image_id(self, name: str) -> str | None:
        with self._lock:
            return self._sources.get(name)
