"""Photographic image handling: decode/encode, grayscale, warping, thresholds.

Images travel through the pipeline as (H, W, 3) uint8 RGB arrays.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .geometry import Homography

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class ImageDecodeError(ValueError):
    """The byte stream is not a decodable PNG/JPEG image."""


def decode_image(data: bytes) -> np.ndarray:
    """Decode PNG or JPEG bytes to an (H, W, 3) uint8 RGB array."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode image: {exc}") from exc


def load_image(path: str | Path) -> np.ndarray:
    try:
        payload = Path(path).read_bytes()
    except OSError as exc:
        raise ImageDecodeError(f"cannot read {path}: {exc}") from exc
    return decode_image(payload)


def save_image(image: np.ndarray, path: str | Path) -> None:
    """Encode by suffix; PNG keeps the pixels lossless."""
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(str(path))


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma as float64 in [0, 255]."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr[:, :, 0] * 0.299 + arr[:, :, 1] * 0.587 + arr[:, :, 2] * 0.114
    raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {arr.shape}")


def warp_image(gray: np.ndarray, h: Homography, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear warp of a grayscale image through the inverse map.

    Out-of-bounds sources read as 0, matching the mask warp convention.
    """
    src = np.asarray(gray, dtype=np.float64)
    inv = h.inverse().matrix
    us, vs = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    w = inv[2, 0] * us + inv[2, 1] * vs + inv[2, 2]
    safe = np.abs(w) > 1e-12
    w_safe = np.where(safe, w, 1.0)
    sx = (inv[0, 0] * us + inv[0, 1] * vs + inv[0, 2]) / w_safe
    sy = (inv[1, 0] * us + inv[1, 1] * vs + inv[1, 2]) / w_safe

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    height, width = src.shape

    def sample(xi, yi):
        ok = (xi >= 0) & (xi < width) & (yi >= 0) & (yi < height)
        vals = np.zeros_like(sx)
        vals[ok] = src[yi[ok], xi[ok]]
        return vals

    v00 = sample(x0, y0)
    v10 = sample(x0 + 1, y0)
    v01 = sample(x0, y0 + 1)
    v11 = sample(x0 + 1, y0 + 1)
    out = (
        v00 * (1 - fx) * (1 - fy)
        + v10 * fx * (1 - fy)
        + v01 * (1 - fx) * fy
        + v11 * fx * fy
    )
    out[~safe] = 0.0
    return out


def otsu_threshold(values: np.ndarray) -> float:
    """Otsu's threshold over a sample of gray levels.

    Maximizes between-class variance on a 256-bin histogram; returns the
    bin value such that foreground is strictly greater.  A constant sample
    returns that constant (so strict comparison selects nothing).
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        return 0.0
    lo = float(vals.min())
    hi = float(vals.max())
    if hi - lo < 1e-12:
        return lo
    hist, edges = np.histogram(vals, bins=256, range=(lo, hi))
    centers = (edges[:-1] + edges[1:]) / 2.0
    weights = hist.astype(np.float64) / vals.size
    w0 = np.cumsum(weights)
    w1 = 1.0 - w0
    mean_cum = np.cumsum(weights * centers)
    mean_total = mean_cum[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = mean_cum / w0
        mu1 = (mean_total - mean_cum) / w1
        variance = w0 * w1 * (mu0 - mu1) ** 2
    variance[~np.isfinite(variance)] = -1.0
    return float(centers[int(np.argmax(variance))])
