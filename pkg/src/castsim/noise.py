"""Lattice gradient noise and its fractal / turbulence sums.

The primitive is 2D Perlin-style gradient noise with hash-derived gradient
directions (no permutation table), so any (x, y, seed) triple is reproducible
without shared state. Values are scaled to [-1, 1]; the noise is exactly zero
at every lattice point, which the tests exploit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_SCALE = np.sqrt(2.0)  # 2D gradient noise is bounded by sqrt(2)/2


@dataclass(frozen=True)
class NoiseSpec:
    """Parameters of one fractal or turbulence noise field."""

    kind: str = "fractal"  # "fractal" | "turbulence"
    octaves: int = 3
    base_frequency: float = 1.0  # cycles per mm
    lacunarity: float = 2.0
    gain: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("fractal", "turbulence"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if self.base_frequency <= 0:
            raise ValueError("base_frequency must be positive")
        if self.lacunarity <= 1:
            raise ValueError("lacunarity must exceed 1")
        if not 0.0 < self.gain < 1.0:
            raise ValueError("gain must lie in (0, 1)")

    @property
    def amplitude_bound(self) -> float:
        """Geometric bound sum(gain^o) on |fbm| and turbulence."""
        return (1.0 - self.gain ** self.octaves) / (1.0 - self.gain)


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = (z + _GOLDEN).astype(np.uint64)
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    return z


def hash_u64(*parts) -> int:
    """Deterministic 64-bit hash of a sequence of integers.

    Used everywhere a derived seed is needed (per octave, per image, per
    defect), keeping batch generation order-independent.
    """
    h = np.uint64(0)
    with np.errstate(over="ignore"):
        for p in parts:
            h = _splitmix(h ^ np.uint64(int(p) & 0xFFFFFFFFFFFFFFFF))
    return int(h)


def _corner_gradients(ix: np.ndarray, iy: np.ndarray, seed: int):
    with np.errstate(over="ignore"):
        h = _splitmix(_splitmix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ ix.astype(np.uint64)) ^
                      iy.astype(np.uint64))
    angle = h.astype(np.float64) / 2.0 ** 64 * (2.0 * np.pi)
    return np.cos(angle), np.sin(angle)


def gradient_noise(x, y, seed: int = 0) -> np.ndarray:
    """C1-continuous lattice gradient noise in [-1, 1], zero at lattice points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    ix = x0.astype(np.int64)
    iy = y0.astype(np.int64)

    total = np.zeros(np.broadcast(x, y).shape)
    # quintic fade keeps the field C2 across cell boundaries
    u = fx * fx * fx * (fx * (fx * 6.0 - 15.0) + 10.0)
    v = fy * fy * fy * (fy * (fy * 6.0 - 15.0) + 10.0)
    for dx in (0, 1):
        for dy in (0, 1):
            gx, gy = _corner_gradients(ix + dx, iy + dy, seed)
            dot = gx * (fx - dx) + gy * (fy - dy)
            wx = u if dx else 1.0 - u
            wy = v if dy else 1.0 - v
            total = total + wx * wy * dot
    return total * _SCALE


def fbm(x, y, spec: NoiseSpec) -> np.ndarray:
    """Fractal sum: sum_o gain^o * noise(x f_o, y f_o) with f_o growing by
    lacunarity; bounded by spec.amplitude_bound."""
    return _octave_sum(x, y, spec, signed=True)


def turbulence(x, y, spec: NoiseSpec) -> np.ndarray:
    """Like fbm but summing |noise| per octave; non-negative, same bound."""
    return _octave_sum(x, y, spec, signed=False)


def _octave_sum(x, y, spec: NoiseSpec, signed: bool) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    total = np.zeros(np.broadcast(x, y).shape)
    amp = 1.0
    freq = spec.base_frequency
    for o in range(spec.octaves):
        layer = gradient_noise(x * freq, y * freq, hash_u64(spec.seed, o))
        if not signed:
            layer = np.abs(layer)
        total = total + amp * layer
        amp *= spec.gain
        freq *= spec.lacunarity
    return total


def evaluate(x, y, spec: NoiseSpec) -> np.ndarray:
    """Dispatch on spec.kind."""
    if spec.kind == "turbulence":
        return turbulence(x, y, spec)
    return fbm(x, y, spec)
