"""Run configuration loading.

One YAML file per camera rig holds the pipeline settings, an optional
default geolocation for images without a sidecar, and optional renames
from annotation class strings to the built-in taxonomy.  The bird's-eye
transform comes either as an explicit 3x3 matrix or as four ground-plane
point correspondences to estimate it from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .datastore import GeoPoint
from .geometry import GeometryError, Homography, Polygon, estimate_homography
from .pipeline import PipelineConfig


class ConfigError(ValueError):
    """The configuration file is missing, unreadable or inconsistent."""


@dataclass(frozen=True)
class RuntimeConfig:
    pipeline: PipelineConfig
    default_geo: GeoPoint | None = None
    class_labels: dict[str, str] = field(default_factory=dict)


def _homography_from(doc) -> Homography:
    if "matrix" in doc:
        return Homography(doc["matrix"])
    if "src_quad" in doc and "dst_quad" in doc:
        return estimate_homography(
            [(float(x), float(y)) for x, y in doc["src_quad"]],
            [(float(x), float(y)) for x, y in doc["dst_quad"]],
        )
    raise ConfigError("bev_homography needs either 'matrix' or 'src_quad'/'dst_quad'")


def parse_runtime_config(doc: dict) -> RuntimeConfig:
    try:
        roi = Polygon([(float(x), float(y)) for x, y in doc["roi"]])
        pipeline = PipelineConfig(
            overlap_threshold=float(doc["overlap_threshold"]),
            roi=roi,
            bev_homography=_homography_from(doc["bev_homography"]),
            fallback_intensity_threshold=float(doc.get("fallback_intensity_threshold", 70.0)),
            min_component_area=int(doc.get("min_component_area", 60)),
            marking_intensity_threshold=float(doc.get("marking_intensity_threshold", 220.0)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, GeometryError) as exc:
        raise ConfigError(f"invalid pipeline configuration: {exc}") from exc

    default_geo = None
    if doc.get("default_geo") is not None:
        geo = doc["default_geo"]
        try:
            default_geo = GeoPoint(float(geo["lat"]), float(geo["lon"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid default_geo: {exc}") from exc

    class_labels = doc.get("class_labels") or {}
    if not isinstance(class_labels, dict):
        raise ConfigError("class_labels must be a mapping")
    return RuntimeConfig(pipeline=pipeline, default_geo=default_geo, class_labels=dict(class_labels))


def load_runtime_config(path: str | Path) -> RuntimeConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"configuration root must be a mapping: {path}")
    return parse_runtime_config(doc)
