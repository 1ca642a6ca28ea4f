"""Parametric hole defects: circular base shape mixed with noise.

A defect is built on a local mm grid. The rim radius is modulated
angularly by one noise channel and the floor depth multiplicatively by a
second, independent channel; both channels are normalized by their
geometric amplitude bound so the stated depth bounds are hard guarantees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidRange, ResolutionTooLow
from .imaging import HeightMap, MaskMap
from .noise import NoiseSpec, evaluate, hash_u64

MASK_EPSILON_MM = 1e-6


@dataclass(frozen=True)
class DefectParams:
    """One hole defect: geometry plus two noise channels."""

    radius_mm: float = 0.8
    depth_mm: float = 0.4
    edge_noise: NoiseSpec = field(default_factory=NoiseSpec)
    edge_amplitude: float = 0.3  # fraction of radius, [0, 1)
    floor_noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(kind="turbulence"))
    floor_amplitude: float = 0.2  # fraction of depth, [0, 1)
    profile_power: float = 1.0  # >= 1 rounded, < 1 steep-walled cavity
    resolution: float = 50.0  # pixels per mm

    def __post_init__(self):
        if self.radius_mm <= 0 or self.depth_mm <= 0:
            raise ValueError("radius and depth must be positive")
        if not 0.0 <= self.edge_amplitude < 1.0:
            raise ValueError("edge_amplitude must lie in [0, 1)")
        if not 0.0 <= self.floor_amplitude < 1.0:
            raise ValueError("floor_amplitude must lie in [0, 1)")
        if self.profile_power <= 0:
            raise ValueError("profile_power must be positive")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")


@dataclass(frozen=True)
class DefectInstance:
    """Generated height map + matching mask for one defect."""

    height: HeightMap
    mask: MaskMap
    params: DefectParams
    seed: int


def _normalized_noise(x, y, spec: NoiseSpec, seed: int) -> np.ndarray:
    """Noise channel rescaled into [-1, 1] (or [0, 1] for turbulence)."""
    derived = replace(spec, seed=hash_u64(spec.seed, seed))
    return evaluate(x, y, derived) / spec.amplitude_bound


def generate_defect(params: DefectParams, seed: int) -> DefectInstance:
    """Generate one hole defect deterministically from (params, seed).

    Grid: square, odd-sided, covering 2 * radius * (1 + edge_amplitude) mm
    plus 2 pixels of padding per side, centred on an exact pixel. Inside the
    noise-modulated rim the depth follows
    -depth * (1 - (r/R)^2)^profile_power scaled by the floor channel.
    """
    if 2.0 * params.radius_mm * params.resolution < 3.0:
        raise ResolutionTooLow(
            f"defect spans under 3 pixels at {params.resolution} px/mm")
    extent = 2.0 * params.radius_mm * (1.0 + params.edge_amplitude)
    size = int(math.ceil(extent * params.resolution)) + 4
    if size % 2 == 0:
        size += 1
    c = (size - 1) // 2
    coords = (np.arange(size) - c) / params.resolution  # mm
    X, Y = np.meshgrid(coords, coords)
    r = np.hypot(X, Y)
    theta = np.arctan2(Y, X)

    # rim radius modulated along the circle; the noise is sampled on the
    # physical circle of the nominal radius so base_frequency keeps its units
    edge = _normalized_noise(params.radius_mm * np.cos(theta),
                             params.radius_mm * np.sin(theta),
                             params.edge_noise, hash_u64(seed, 0))
    R = params.radius_mm * (1.0 + params.edge_amplitude * edge)

    inside = r <= R
    profile = np.zeros_like(r)
    rel = np.clip(np.where(inside, r / np.where(R > 0, R, 1.0), 1.0), 0.0, 1.0)
    profile[inside] = (1.0 - rel[inside] ** 2) ** params.profile_power

    floor = _normalized_noise(X, Y, params.floor_noise, hash_u64(seed, 1))
    height = -params.depth_mm * profile * (1.0 + params.floor_amplitude * floor)
    height = np.minimum(height, 0.0)
    height[~inside] = 0.0

    mask = (height < -MASK_EPSILON_MM).astype(np.int32)
    return DefectInstance(
        height=HeightMap(height, resolution=params.resolution),
        mask=MaskMap(mask),
        params=params,
        seed=seed,
    )


def instance_from_height_map(hm: HeightMap, seed: int = 0) -> DefectInstance:
    """Wrap an externally loaded height map as a DefectInstance.

    The mask is re-derived from the heights; the params are nominal values
    reconstructed from the raster (used for metadata only).
    """
    depth = max(float(-hm.heights.min()), 1e-9)
    radius = max(hm.width / hm.resolution / 2.0, 1e-9)
    params = DefectParams(radius_mm=radius, depth_mm=depth,
                          edge_amplitude=0.0, floor_amplitude=0.0,
                          resolution=hm.resolution)
    mask = (hm.heights < -MASK_EPSILON_MM).astype(np.int32)
    return DefectInstance(height=hm, mask=MaskMap(mask), params=params, seed=seed)


@dataclass(frozen=True)
class DefectParamRanges:
    """Per-field min/max bounds for randomized defect sampling."""

    radius_mm: tuple = (0.3, 1.2)
    depth_mm: tuple = (0.1, 0.6)
    edge_amplitude: tuple = (0.0, 0.5)
    floor_amplitude: tuple = (0.0, 0.4)
    profile_power: tuple = (0.5, 2.0)
    base_frequency: tuple = (0.5, 3.0)
    octaves: tuple = (1, 4)  # integer, inclusive
    lacunarity: tuple = (1.8, 2.2)
    gain: tuple = (0.3, 0.7)
    kinds: tuple = ("fractal", "turbulence")
    resolution: float = 50.0

    def __post_init__(self):
        for name in ("radius_mm", "depth_mm", "edge_amplitude", "floor_amplitude",
                     "profile_power", "base_frequency", "octaves", "lacunarity",
                     "gain"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise InvalidRange(f"{name}: min {lo} > max {hi}")
        if not self.kinds:
            raise InvalidRange("kinds must be non-empty")


def _uniform(rng: np.random.Generator, bounds) -> float:
    lo, hi = bounds
    if lo == hi:
        return float(lo)
    return float(rng.uniform(lo, hi))


def _sample_noise_spec(ranges: DefectParamRanges, rng: np.random.Generator) -> NoiseSpec:
    return NoiseSpec(
        kind=str(rng.choice(list(ranges.kinds))),
        octaves=int(rng.integers(ranges.octaves[0], ranges.octaves[1] + 1)),
        base_frequency=_uniform(rng, ranges.base_frequency),
        lacunarity=_uniform(rng, ranges.lacunarity),
        gain=_uniform(rng, ranges.gain),
        seed=int(rng.integers(0, 2 ** 63)),
    )


def sample_params(ranges: DefectParamRanges, rng: np.random.Generator) -> DefectParams:
    """Uniform independent draw of DefectParams from per-field ranges."""
    return DefectParams(
        radius_mm=_uniform(rng, ranges.radius_mm),
        depth_mm=_uniform(rng, ranges.depth_mm),
        edge_noise=_sample_noise_spec(ranges, rng),
        edge_amplitude=_uniform(rng, ranges.edge_amplitude),
        floor_noise=_sample_noise_spec(ranges, rng),
        floor_amplitude=_uniform(rng, ranges.floor_amplitude),
        profile_power=_uniform(rng, ranges.profile_power),
        resolution=ranges.resolution,
    )
