import numpy as np
import pytest

from castsim.noise import NoiseSpec, evaluate, fbm, gradient_noise, hash_u64, turbulence


def test_zero_at_lattice_points(rng):
    pts = rng.integers(-50, 50, size=(200, 2)).astype(float)
    values = gradient_noise(pts[:, 0], pts[:, 1], seed=7)
    assert (values == 0.0).all()


def test_deterministic(rng):
    x = rng.uniform(-10, 10, 500)
    y = rng.uniform(-10, 10, 500)
    assert np.array_equal(gradient_noise(x, y, seed=3),
                          gradient_noise(x, y, seed=3))
    assert not np.array_equal(gradient_noise(x, y, seed=3),
                              gradient_noise(x, y, seed=4))


def test_bounds_exhaustive(rng):
    # oracle: dense sampling of one million points
    x = rng.uniform(-100, 100, 1_000_000)
    y = rng.uniform(-100, 100, 1_000_000)
    v = gradient_noise(x, y, seed=0)
    assert v.min() >= -1.0 and v.max() <= 1.0
    # the empirical extremes should approach the theoretical bound
    assert np.abs(v).max() > 0.5


def test_continuity_across_cells():
    eps = 1e-7
    left = gradient_noise(1.0 - eps, 0.37, seed=5)
    right = gradient_noise(1.0 + eps, 0.37, seed=5)
    assert abs(left - right) < 1e-5


class TestFbm:
    def test_single_octave_degenerate(self, rng):
        spec = NoiseSpec(octaves=1, base_frequency=1.3, seed=9)
        x = rng.uniform(-5, 5, 100)
        y = rng.uniform(-5, 5, 100)
        expected = gradient_noise(x * 1.3, y * 1.3, hash_u64(9, 0))
        assert np.array_equal(fbm(x, y, spec), expected)

    def test_geometric_bound(self, rng):
        spec = NoiseSpec(octaves=4, base_frequency=0.7, gain=0.6, seed=2)
        x = rng.uniform(-20, 20, 10_000)
        y = rng.uniform(-20, 20, 10_000)
        bound = (1 - 0.6 ** 4) / (1 - 0.6)
        assert np.abs(fbm(x, y, spec)).max() <= bound
        assert spec.amplitude_bound == pytest.approx(bound)

    def test_term_by_term_oracle(self, rng):
        # oracle: manual three-term summation
        spec = NoiseSpec(octaves=3, base_frequency=1.1, lacunarity=2.3,
                         gain=0.45, seed=12)
        x = rng.uniform(-8, 8, 100)
        y = rng.uniform(-8, 8, 100)
        expected = np.zeros(100)
        for o in range(3):
            f = 1.1 * 2.3 ** o
            expected += 0.45 ** o * gradient_noise(x * f, y * f, hash_u64(12, o))
        assert np.abs(fbm(x, y, spec) - expected).max() < 1e-12


class TestTurbulence:
    def test_lattice_zero_single_octave(self):
        spec = NoiseSpec(kind="turbulence", octaves=1, base_frequency=1.0, seed=4)
        assert turbulence(3.0, -2.0, spec) == 0.0

    def test_non_negative(self, rng):
        spec = NoiseSpec(kind="turbulence", octaves=3, seed=8)
        x = rng.uniform(-30, 30, 10_000)
        y = rng.uniform(-30, 30, 10_000)
        assert turbulence(x, y, spec).min() >= 0.0

    def test_term_by_term_oracle(self, rng):
        spec = NoiseSpec(kind="turbulence", octaves=3, base_frequency=0.9,
                         lacunarity=2.0, gain=0.5, seed=21)
        x = rng.uniform(-8, 8, 100)
        y = rng.uniform(-8, 8, 100)
        expected = np.zeros(100)
        for o in range(3):
            f = 0.9 * 2.0 ** o
            expected += 0.5 ** o * np.abs(gradient_noise(x * f, y * f,
                                                         hash_u64(21, o)))
        assert np.abs(turbulence(x, y, spec) - expected).max() < 1e-12


def test_evaluate_dispatch(rng):
    x = rng.uniform(-3, 3, 10)
    y = rng.uniform(-3, 3, 10)
    assert np.array_equal(evaluate(x, y, NoiseSpec(kind="fractal", seed=1)),
                          fbm(x, y, NoiseSpec(kind="fractal", seed=1)))
    assert np.array_equal(evaluate(x, y, NoiseSpec(kind="turbulence", seed=1)),
                          turbulence(x, y, NoiseSpec(kind="turbulence", seed=1)))


def test_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(kind="white")
    with pytest.raises(ValueError):
        NoiseSpec(octaves=0)
    with pytest.raises(ValueError):
        NoiseSpec(gain=1.0)
    with pytest.raises(ValueError):
        NoiseSpec(lacunarity=1.0)
