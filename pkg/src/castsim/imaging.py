"""Raster field types, normal-vector encodings, and PNG I/O.

All per-pixel fields are thin immutable wrappers around numpy arrays.
Intensities are normalized to [0, 1] at load time regardless of source bit
depth, so every downstream solver sees one numeric contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, EmptyRaster, UnsupportedFormat

# Rec. 709 luminance weights, fixed so tests can be exact.
LUMA_WEIGHTS = (0.2126, 0.7152, 0.0722)

_PLACEHOLDER_NORMAL = np.array([0.0, 0.0, 1.0])


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf")


@dataclass(frozen=True)
class GrayImage:
    """Single-channel intensity raster with values in [0, 1]."""

    data: np.ndarray  # (H, W) float64

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise EmptyRaster(f"expected non-empty (H, W) array, got shape {data.shape}")
        _check_finite(data, "intensity")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class NormalMap:
    """Per-pixel unit normals in tangent space (+Z out of the surface).

    Invalid pixels hold the placeholder (0, 0, 1) and are flagged False in
    ``valid``.
    """

    normals: np.ndarray  # (H, W, 3) float64
    valid: np.ndarray | None = None  # (H, W) bool

    def __post_init__(self):
        normals = np.array(np.asarray(self.normals, dtype=np.float64))
        if normals.ndim != 3 or normals.shape[2] != 3 or normals[..., 0].size == 0:
            raise EmptyRaster(f"expected non-empty (H, W, 3) array, got shape {normals.shape}")
        _check_finite(normals, "normals")
        valid = self.valid
        if valid is None:
            valid = np.ones(normals.shape[:2], dtype=bool)
        else:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != normals.shape[:2]:
                raise DimensionMismatch("validity mask shape does not match normals")
        norms = np.linalg.norm(normals[valid], axis=-1)
        if valid.any():
            if np.abs(norms - 1.0).max() > 1e-6:
                raise ValueError("valid normals must be unit length within 1e-6")
            if normals[valid][:, 2].min() < -1e-6:
                raise ValueError("valid normals must have non-negative z")
        normals[~valid] = _PLACEHOLDER_NORMAL
        object.__setattr__(self, "normals", _freeze(normals))
        object.__setattr__(self, "valid", _freeze(valid))

    @property
    def width(self) -> int:
        return self.normals.shape[1]

    @property
    def height(self) -> int:
        return self.normals.shape[0]


@dataclass(frozen=True)
class AlbedoMap:
    """Per-pixel non-negative diffuse reflectivity."""

    albedo: np.ndarray  # (H, W) float64

    def __post_init__(self):
        albedo = np.asarray(self.albedo, dtype=np.float64)
        if albedo.ndim != 2 or albedo.size == 0:
            raise EmptyRaster(f"expected non-empty (H, W) array, got shape {albedo.shape}")
        _check_finite(albedo, "albedo")
        if albedo.min() < 0.0:
            raise ValueError("albedo must be non-negative")
        object.__setattr__(self, "albedo", _freeze(albedo))

    @property
    def width(self) -> int:
        return self.albedo.shape[1]

    @property
    def height(self) -> int:
        return self.albedo.shape[0]


@dataclass(frozen=True)
class HeightMap:
    """Per-pixel heights in millimetres; negative values are depressions."""

    heights: np.ndarray  # (H, W) float64, mm
    resolution: float = 1.0  # pixels per mm

    def __post_init__(self):
        heights = np.asarray(self.heights, dtype=np.float64)
        if heights.ndim != 2 or heights.size == 0:
            raise EmptyRaster(f"expected non-empty (H, W) array, got shape {heights.shape}")
        _check_finite(heights, "heights")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "heights", _freeze(heights))

    @property
    def width(self) -> int:
        return self.heights.shape[1]

    @property
    def height(self) -> int:
        return self.heights.shape[0]


@dataclass(frozen=True)
class MaskMap:
    """Per-pixel integer defect IDs; 0 means background."""

    labels: np.ndarray  # (H, W) non-negative int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.size == 0:
            raise EmptyRaster(f"expected non-empty (H, W) array, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("labels must be integers")
        if labels.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "labels", _freeze(labels.astype(np.int32)))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


# ---------------------------------------------------------------------------
# normal map encode / decode
# ---------------------------------------------------------------------------

def encode_normal_map(nm: NormalMap) -> np.ndarray:
    """Encode unit normals into an 8-bit 3-channel raster.

    Channel c = round((n_c + 1) / 2 * 255) with round-half-up, the common
    tangent-space raster convention: (0, 0, 1) maps to (128, 128, 255).
    """
    scaled = (nm.normals + 1.0) / 2.0 * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def decode_normal_map(raster: np.ndarray) -> NormalMap:
    """Decode an 8-bit 3-channel raster back into a unit normal map.

    Per pixel n = normalize(2 c / 255 - 1); zero-length or back-facing
    vectors are marked invalid.
    """
    raster = np.asarray(raster)
    if raster.size == 0:
        raise EmptyRaster("cannot decode an empty raster")
    if raster.ndim != 3 or raster.shape[2] != 3:
        raise UnsupportedFormat(f"expected (H, W, 3) raster, got shape {raster.shape}")
    v = 2.0 * raster.astype(np.float64) / 255.0 - 1.0
    norm = np.linalg.norm(v, axis=-1)
    valid = (norm > 1e-12) & (v[..., 2] >= 0.0)
    safe = np.where(norm[..., None] > 1e-12, norm[..., None], 1.0)
    return NormalMap(v / safe, valid)


# ---------------------------------------------------------------------------
# PNG I/O
# ---------------------------------------------------------------------------

def load_image(path) -> GrayImage:
    """Load a PNG as a normalized GrayImage.

    8- and 16-bit grayscale load losslessly (divided by the max code value);
    3-channel images are converted with the Rec. 709 luminance weights.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if path.stat().st_size == 0:
        raise EmptyRaster(f"{path} is empty")
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:  # Pillow raises several unrelated types
        raise UnsupportedFormat(f"cannot read {path}: {exc}") from exc
    if img.width == 0 or img.height == 0:
        raise EmptyRaster(f"{path} has zero size")
    if img.mode in ("L", "P"):
        data = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    elif img.mode in ("I", "I;16", "I;16B"):
        data = np.asarray(img, dtype=np.float64) / 65535.0
    elif img.mode in ("RGB", "RGBA"):
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        data = rgb @ np.asarray(LUMA_WEIGHTS)
    else:
        raise UnsupportedFormat(f"unsupported image mode {img.mode!r} in {path}")
    return GrayImage(np.clip(data, 0.0, 1.0))


def save_image(img: GrayImage, path, bit_depth: int = 16) -> None:
    """Write a GrayImage as 8- or 16-bit grayscale PNG."""
    if bit_depth == 8:
        arr = np.floor(img.data * 255.0 + 0.5).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(path)
    elif bit_depth == 16:
        arr = np.floor(img.data * 65535.0 + 0.5).astype(np.uint16)
        Image.fromarray(arr).save(path)
    else:
        raise UnsupportedFormat(f"bit depth {bit_depth} not supported")


def load_image_stack(paths) -> list[GrayImage]:
    """Load several images that must share dimensions."""
    images = [load_image(p) for p in paths]
    if not images:
        raise EmptyRaster("no images given")
    shape = images[0].data.shape
    for p, im in zip(paths, images):
        if im.data.shape != shape:
            raise DimensionMismatch(f"{p} has shape {im.data.shape}, expected {shape}")
    return images


def save_normal_map(nm: NormalMap, path) -> None:
    Image.fromarray(encode_normal_map(nm), mode="RGB").save(path)


def load_normal_map(path) -> NormalMap:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    img = Image.open(path).convert("RGB")
    if img.width == 0 or img.height == 0:
        raise EmptyRaster(f"{path} has zero size")
    return decode_normal_map(np.asarray(img))


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_height_map(hm: HeightMap, path) -> None:
    """Persist a height map as 16-bit PNG plus a JSON sidecar with the
    physical scale (mm per code unit and offset)."""
    lo = float(hm.heights.min())
    hi = float(hm.heights.max())
    span = hi - lo
    if span == 0.0:
        codes = np.zeros(hm.heights.shape, dtype=np.uint16)
        mm_per_unit = 1.0
    else:
        mm_per_unit = span / 65535.0
        codes = np.floor((hm.heights - lo) / mm_per_unit + 0.5).astype(np.uint16)
    Image.fromarray(codes).save(path)
    sidecar = {
        "mm_per_unit": mm_per_unit,
        "offset_mm": lo,
        "resolution_px_per_mm": hm.resolution,
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, sort_keys=True))


def load_height_map(path) -> HeightMap:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    sidecar = json.loads(_sidecar_path(path).read_text())
    img = Image.open(path)
    if img.width == 0 or img.height == 0:
        raise EmptyRaster(f"{path} has zero size")
    codes = np.asarray(img, dtype=np.float64)
    heights = codes * sidecar["mm_per_unit"] + sidecar["offset_mm"]
    return HeightMap(heights, resolution=sidecar["resolution_px_per_mm"])


def save_mask_map(mm: MaskMap, path) -> None:
    labels = mm.labels
    if labels.max() <= 255:
        Image.fromarray(labels.astype(np.uint8), mode="L").save(path)
    else:
        Image.fromarray(labels.astype(np.uint16), mode="I;16").save(path)


def load_mask_map(path) -> MaskMap:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    img = Image.open(path)
    if img.width == 0 or img.height == 0:
        raise EmptyRaster(f"{path} has zero size")
    return MaskMap(np.asarray(img).astype(np.int32))
