import numpy as np
import pytest

from castsim.imaging import NormalMap
from castsim.noise import NoiseSpec, fbm


def bumpy_normal_map(height, width, seed, frequency=0.05, amplitude=0.1):
    """Smooth synthetic texture normals derived from a noise height field."""
    y, x = np.mgrid[0:height, 0:width].astype(float)
    z = amplitude * fbm(x, y, NoiseSpec(octaves=3, base_frequency=frequency,
                                        seed=seed))
    gy, gx = np.gradient(z)
    n = np.dstack([-gx, -gy, np.ones_like(z)])
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return NormalMap(n)


def random_unit_normals(count, rng):
    """Uniform unit vectors on the upper hemisphere (z >= 0)."""
    v = rng.normal(size=(count, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    v[:, 2] = np.abs(v[:, 2])
    return v


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
