"""HTTP API for the dashboard: defects, markings, uploads, jobs, exports.

JSON in and out, multipart uploads, static file serving for stored images
and masks.  Every non-2xx response carries the error envelope
{"error": <code>, "detail": <message>}.
"""

from __future__ import annotations

import email.parser
import email.policy
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .config import RuntimeConfig
from .datastore import (
    Datastore,
    DefectFilter,
    DefectRecord,
    GeoPoint,
    MarkingRecord,
    NotFoundError,
    ValidationStatus,
    format_timestamp,
)
from .images import IMAGE_SUFFIXES
from .jobs import JobExecutor, ProcessingJob
from .pipeline import DefectClass

EXPORT_FILENAME = "roadatlas-report"


def error_response(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail})


def defect_json(r: DefectRecord) -> dict:
    return {
        "id": r.id,
        "image_id": r.image_id,
        "class": r.defect_class.label,
        "lat": r.geo.lat,
        "lon": r.geo.lon,
        "bbox": {
            "x_min": r.bbox.x_min,
            "y_min": r.bbox.y_min,
            "x_max": r.bbox.x_max,
            "y_max": r.bbox.y_max,
        },
        "confidence": r.confidence,
        "status": r.status.value,
        "checked_by": r.checked_by,
        "checked_at": format_timestamp(r.checked_at) if r.checked_at else None,
        "created_at": format_timestamp(r.created_at) if r.created_at else None,
    }


def marking_json(r: MarkingRecord) -> dict:
    return {
        "id": r.id,
        "image_id": r.image_id,
        "points": [[p.x, p.y] for p in r.contour.points],
        "coverage": r.coverage,
        "status": r.status.value,
        "checked_by": r.checked_by,
        "checked_at": format_timestamp(r.checked_at) if r.checked_at else None,
        "created_at": format_timestamp(r.created_at) if r.created_at else None,
    }


def parse_defect_filter(params) -> DefectFilter:
    """Build a datastore filter from query parameters; ValueError when malformed."""
    classes = None
    tokens = [t for raw in params.getlist("class") for t in raw.split(",") if t]
    if tokens:
        classes = frozenset(DefectClass.from_label(t) for t in tokens)
    statuses = None
    tokens = [t for raw in params.getlist("status") for t in raw.split(",") if t]
    if tokens:
        statuses = frozenset(ValidationStatus(t) for t in tokens)
    corner_keys = ("min_lat", "min_lon", "max_lat", "max_lon")
    present = [k for k in corner_keys if params.get(k) not in (None, "")]
    geo_box = None
    if present:
        if len(present) != 4:
            raise ValueError("geo filter needs all of min_lat, min_lon, max_lat, max_lon")
        vals = [float(params[k]) for k in corner_keys]
        geo_box = (GeoPoint(vals[0], vals[1]), GeoPoint(vals[2], vals[3]))
    image_id = params.get("image_id") or None
    return DefectFilter(classes=classes, statuses=statuses, geo_box=geo_box, image_id=image_id)


def parse_multipart(content_type: str, body: bytes) -> list[tuple[str | None, str | None, bytes]]:
    """Split a multipart/form-data body into (field name, filename, payload)."""
    header = b"Content-Type: " + content_type.encode("latin-1") + b"\r\nMIME-Version: 1.0\r\n\r\n"
    msg = email.parser.BytesParser(policy=email.policy.default).parsebytes(header + body)
    if not msg.is_multipart():
        raise ValueError("body is not multipart/form-data")
    parts = []
    for part in msg.iter_parts():
        name = part.get_param("name", header="content-disposition")
        filename = part.get_filename()
        payload = part.get_payload(decode=True) or b""
        parts.append((name, filename, payload))
    return parts


def create_app(
    data_root: str | Path,
    runtime: RuntimeConfig,
    *,
    worker: bool = True,
) -> FastAPI:
    store = Datastore(data_root)
    executor = JobExecutor(store, runtime.pipeline, default_geo=runtime.default_geo)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if worker:
            executor.start()
        try:
            yield
        finally:
            if worker:
                executor.stop()

    app = FastAPI(title="roadatlas", lifespan=lifespan)
    app.state.store = store
    app.state.executor = executor
    app.state.runtime = runtime

    @app.exception_handler(StarletteHTTPException)
    async def http_error(request: Request, exc: StarletteHTTPException):
        code = {404: "not_found", 405: "method_not_allowed"}.get(exc.status_code, "http_error")
        return error_response(exc.status_code, code, str(exc.detail))

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return error_response(400, "bad_request", str(exc))

    # -- defects --------------------------------------------------------------

    @app.get("/api/defects")
    async def list_defects(request: Request):
        try:
            flt = parse_defect_filter(request.query_params)
        except ValueError as exc:
            return error_response(400, "bad_request", str(exc))
        return [defect_json(r) for r in store.query_defects(flt)]

    @app.get("/api/defects/{defect_id}")
    async def get_defect(defect_id: str):
        try:
            record = store.get_defect(defect_id)
        except NotFoundError as exc:
            return error_response(404, "not_found", str(exc))
        body = defect_json(record)
        asset = store.get_image(record.image_id)
        body["image_url"] = f"/files/{asset.path}"
        body["mask_url"] = f"/files/{record.mask_path}"
        return body

    @app.post("/api/defects/{defect_id}/validation")
    async def validate_defect(defect_id: str, request: Request):
        outcome = await _apply_validation(request, store.set_validation, defect_id)
        return outcome if isinstance(outcome, JSONResponse) else defect_json(outcome)

    # -- markings ---------------------------------------------------------------

    @app.get("/api/markings")
    async def list_markings(request: Request):
        image_id = request.query_params.get("image_id")
        if image_id is not None and not image_id.strip():
            return error_response(400, "bad_request", "image_id must be non-empty")
        return [marking_json(r) for r in store.query_markings(image_id)]

    @app.post("/api/markings/{marking_id}/validation")
    async def validate_marking(marking_id: str, request: Request):
        outcome = await _apply_validation(request, store.set_marking_validation, marking_id)
        return outcome if isinstance(outcome, JSONResponse) else marking_json(outcome)

    async def _apply_validation(request: Request, setter, record_id: str):
        try:
            body = await request.json()
        except Exception:
            return error_response(400, "bad_request", "request body must be JSON")
        status_token = body.get("status") if isinstance(body, dict) else None
        user = body.get("user") if isinstance(body, dict) else None
        if status_token not in (ValidationStatus.CONFIRMED.value, ValidationStatus.REJECTED.value):
            return error_response(422, "invalid_status", f"status must be Confirmed or Rejected, got {status_token!r}")
        if not isinstance(user, str) or not user.strip():
            return error_response(422, "invalid_user", "user must be a non-empty string")
        try:
            return setter(record_id, ValidationStatus(status_token), user)
        except NotFoundError as exc:
            return error_response(404, "not_found", str(exc))

    # -- uploads and jobs ----------------------------------------------------------

    @app.post("/api/uploads", status_code=202)
    async def upload(request: Request):
        content_type = request.headers.get("content-type", "")
        if not content_type.startswith("multipart/form-data"):
            return error_response(400, "bad_request", "expected multipart/form-data")
        try:
            parts = parse_multipart(content_type, await request.body())
        except ValueError as exc:
            return error_response(400, "bad_request", str(exc))

        images: dict[str, bytes] = {}
        sidecars: dict[str, bytes] = {}
        for _, filename, payload in parts:
            if not filename:
                continue
            clean = Path(filename).name
            suffix = Path(clean).suffix.lower()
            if suffix in IMAGE_SUFFIXES:
                images[clean] = payload
            elif suffix == ".json":
                sidecars[clean] = payload
        if not images:
            return error_response(400, "bad_request", "upload contains no images")

        job_id = executor.new_job_id()
        upload_dir = executor.upload_dir(job_id)
        upload_dir.mkdir(parents=True, exist_ok=True)
        for name, payload in images.items():
            (upload_dir / name).write_bytes(payload)
        for name, payload in sidecars.items():
            (upload_dir / name).write_bytes(payload)
        job = executor.submit(upload_dir, total_images=len(images))
        return {"job_id": job.id}

    @app.get("/api/jobs/{job_id}")
    async def get_job(job_id: str):
        job = executor.get(job_id)
        if job is None:
            return error_response(404, "not_found", f"unknown job id: {job_id}")
        return job.to_dict()

    # -- export ----------------------------------------------------------------

    @app.get("/api/export")
    async def export(request: Request):
        params = request.query_params
        fmt = params.get("format", "")
        if fmt not in ("csv", "json"):
            return error_response(400, "bad_request", f"format must be csv or json, got {fmt!r}")
        validated_raw = params.get("validated_only", "false").lower()
        if validated_raw not in ("true", "false"):
            return error_response(400, "bad_request", "validated_only must be true or false")
        try:
            flt = parse_defect_filter(params)
        except ValueError as exc:
            return error_response(400, "bad_request", str(exc))
        body = store.export_report(fmt, flt, validated_only=validated_raw == "true")
        media = "text/csv; charset=utf-8" if fmt == "csv" else "application/json"
        return Response(
            content=body,
            media_type=media,
            headers={
                "Content-Disposition": f'attachment; filename="{EXPORT_FILENAME}.{fmt}"'
            },
        )

    # -- stored files ------------------------------------------------------------

    @app.get("/files/{rel_path:path}")
    async def serve_file(rel_path: str):
        if not (rel_path.startswith("images/") or rel_path.startswith("masks/")):
            return error_response(404, "not_found", "only stored images and masks are served")
        try:
            full = store.resolve(rel_path)
        except ValueError as exc:
            return error_response(404, "not_found", str(exc))
        if rel_path.startswith("images/"):
            asset = store.image_by_path(rel_path)
            if asset is None:
                return error_response(404, "not_found", f"no image asset at {rel_path}")
            if not asset.anonymized:
                return error_response(403, "forbidden", "image has not been anonymized")
        if not full.is_file():
            return error_response(404, "not_found", f"no such file: {rel_path}")
        media = "image/png" if full.suffix == ".png" else "image/jpeg"
        return FileResponse(full, media_type=media)

    return app
