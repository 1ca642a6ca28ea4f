"""Lambertian photometric stereo from an aligned multi-illumination stack.

Per pixel, observations I_k = rho * (L_k . n) are solved in least squares
for g = rho * n after discarding shadowed and blown-out measurements. The
solver is strictly per-pixel: no smoothing or regularization, so analytic
scenes are exact oracle targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidSlant,
    NoValidPixels,
    RankDeficientRig,
    TooFewLights,
)
from .imaging import AlbedoMap, GrayImage, NormalMap

_COND_LIMIT = 1e8


@dataclass(frozen=True)
class LightRig:
    """K directional lights, unit vectors pointing from surface to light."""

    directions: np.ndarray  # (K, 3)

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=np.float64)
        if d.ndim != 2 or d.shape[1] != 3:
            raise ValueError(f"expected (K, 3) directions, got {d.shape}")
        if d.shape[0] < 3:
            raise TooFewLights(f"need at least 3 lights, got {d.shape[0]}")
        norms = np.linalg.norm(d, axis=1)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("light directions must be unit length")
        if d[:, 2].min() <= 0.0:
            raise ValueError("lights must sit above the surface (z > 0)")
        if np.linalg.matrix_rank(d) < 3:
            raise RankDeficientRig("light directions are coplanar")
        dd = np.array(d)
        dd.flags.writeable = False
        object.__setattr__(self, "directions", dd)

    @property
    def count(self) -> int:
        return self.directions.shape[0]


@dataclass(frozen=True)
class ImageStack:
    """K aligned grayscale images of one surface, one per rig light."""

    images: tuple
    rig: LightRig

    def __post_init__(self):
        images = tuple(self.images)
        if len(images) != self.rig.count:
            raise DimensionMismatch(
                f"{len(images)} images for a {self.rig.count}-light rig")
        shape = images[0].data.shape
        for im in images:
            if im.data.shape != shape:
                raise DimensionMismatch("stack images differ in size")
        object.__setattr__(self, "images", images)

    @property
    def width(self) -> int:
        return self.images[0].width

    @property
    def height(self) -> int:
        return self.images[0].height

    def intensities(self) -> np.ndarray:
        """Stack as a (H, W, K) array."""
        return np.stack([im.data for im in self.images], axis=-1)


@dataclass(frozen=True)
class SolverConfig:
    shadow_threshold: float = 0.02
    highlight_threshold: float = 0.98
    min_valid_lights: int = 3

    def __post_init__(self):
        if not 0.0 <= self.shadow_threshold < self.highlight_threshold <= 1.0:
            raise ValueError("need 0 <= shadow_threshold < highlight_threshold <= 1")
        if self.min_valid_lights < 3:
            raise ValueError("min_valid_lights must be at least 3")


def octagon_rig(slant_degrees: float, count: int = 8) -> LightRig:
    """Ring of lights at a common slant angle, azimuths at equal steps.

    Direction k = (sin s cos(2 pi k / count), sin s sin(2 pi k / count), cos s).
    """
    if not 0.0 < slant_degrees < 90.0:
        raise InvalidSlant(f"slant must be in (0, 90) degrees, got {slant_degrees}")
    if count < 3:
        raise TooFewLights(f"need at least 3 lights, got {count}")
    s = np.deg2rad(slant_degrees)
    k = np.arange(count)
    az = 2.0 * np.pi * k / count
    d = np.stack([np.sin(s) * np.cos(az), np.sin(s) * np.sin(az),
                  np.full(count, np.cos(s))], axis=1)
    return LightRig(d)


def solve_normals(stack: ImageStack, cfg: SolverConfig | None = None):
    """Recover per-pixel normals and albedo from an image stack.

    Returns (NormalMap, AlbedoMap). Pixels with fewer than
    ``min_valid_lights`` usable observations, or whose surviving lights are
    numerically coplanar, are marked invalid (albedo 0).
    """
    if cfg is None:
        cfg = SolverConfig()
    if cfg.min_valid_lights > stack.rig.count:
        raise DimensionMismatch("min_valid_lights exceeds the rig size")
    L = stack.rig.directions  # (K, 3)
    H, W = stack.height, stack.width
    I = stack.intensities().reshape(-1, L.shape[0])  # (P, K)

    usable = (I > cfg.shadow_threshold) & (I < cfg.highlight_threshold)
    w = usable.astype(np.float64)
    enough = usable.sum(axis=1) >= cfg.min_valid_lights

    # Normal equations of the masked system: A g = b with A = L^T W L.
    A = np.einsum("pk,ki,kj->pij", w, L, L)
    b = np.einsum("pk,pk,ki->pi", w, I, L)

    g = np.zeros((I.shape[0], 3))
    solvable = enough.copy()
    idx = np.flatnonzero(enough)
    if idx.size:
        Ai = A[idx]
        cond = np.linalg.cond(Ai)
        well = cond <= _COND_LIMIT
        if well.any():
            g[idx[well]] = np.linalg.solve(Ai[well], b[idx][well][..., None])[..., 0]
        if (~well).any():
            # near-singular surviving light sets: pseudo-inverse fallback,
            # drop pixels whose system is genuinely rank-deficient
            bad = idx[~well]
            rank = np.linalg.matrix_rank(A[bad])
            ok = rank >= 3
            if ok.any():
                g[bad[ok]] = np.einsum(
                    "pij,pj->pi", np.linalg.pinv(A[bad[ok]]), b[bad[ok]])
            solvable[bad[~ok]] = False

    rho = np.linalg.norm(g, axis=1)
    valid = solvable & (rho > 0.0)
    n = np.where(valid[:, None], g / np.where(rho[:, None] > 0, rho[:, None], 1.0),
                 [0.0, 0.0, 1.0])
    flip = n[:, 2] < 0.0
    n[flip] = -n[flip]
    rho = np.where(valid, rho, 0.0)

    nm = NormalMap(n.reshape(H, W, 3), valid.reshape(H, W))
    am = AlbedoMap(rho.reshape(H, W))
    return nm, am


def integrability_report(nm: NormalMap) -> float:
    """Mean absolute curl of the gradient field implied by a normal map.

    The field (p, q) = (-nx/nz, -ny/nz) of an integrable surface has zero
    curl; larger values flag inconsistent scans. Only pixels whose central
    difference stencil touches valid pixels exclusively contribute.
    """
    if not nm.valid.any():
        raise NoValidPixels("normal map has no valid pixels")
    n = nm.normals
    nz = np.where(np.abs(n[..., 2]) > 1e-12, n[..., 2], 1e-12)
    p = -n[..., 0] / nz
    q = -n[..., 1] / nz
    dp_dy = np.gradient(p, axis=0)
    dq_dx = np.gradient(q, axis=1)
    curl = np.abs(dp_dy - dq_dx)
    v = nm.valid
    stencil_ok = v.copy()
    stencil_ok[1:, :] &= v[:-1, :]
    stencil_ok[:-1, :] &= v[1:, :]
    stencil_ok[:, 1:] &= v[:, :-1]
    stencil_ok[:, :-1] &= v[:, 1:]
    if not stencil_ok.any():
        raise NoValidPixels("no pixel has a fully valid stencil")
    return float(curl[stencil_ok].mean())


def render_lambertian(normals: np.ndarray, albedo: np.ndarray,
                      rig: LightRig) -> ImageStack:
    """Analytic Lambertian imaging of a normal field under a rig.

    Convenience for building synthetic stacks: I_k = albedo * max(0, L_k . n),
    clamped to [0, 1].
    """
    images = []
    for d in rig.directions:
        shading = albedo * np.clip(normals @ d, 0.0, None)
        images.append(GrayImage(np.clip(shading, 0.0, 1.0)))
    return ImageStack(tuple(images), rig)
