import numpy as np
import pytest

from castsim.defects import (
    MASK_EPSILON_MM,
    DefectParamRanges,
    DefectParams,
    generate_defect,
    instance_from_height_map,
    sample_params,
)
from castsim.errors import InvalidRange, ResolutionTooLow
from castsim.imaging import HeightMap
from castsim.noise import NoiseSpec


def clean_params(**kw):
    """Params with both noise channels switched off via zero amplitudes."""
    base = dict(radius_mm=1.0, depth_mm=0.5, edge_amplitude=0.0,
                floor_amplitude=0.0, profile_power=1.0, resolution=50.0)
    base.update(kw)
    return DefectParams(**base)


class TestGeometry:
    def test_grid_is_odd_with_center_pixel(self):
        inst = generate_defect(clean_params(), seed=0)
        h = inst.height.heights
        assert h.shape[0] % 2 == 1 and h.shape[1] % 2 == 1
        c = (h.shape[0] - 1) // 2
        # the paraboloid minimum sits exactly at the center pixel
        assert h[c, c] == -0.5
        assert h.min() == -0.5

    def test_disk_area_oracle(self):
        # oracle: pixel count of the mask vs the analytic disk area
        p = clean_params(radius_mm=1.0, resolution=100.0)
        inst = generate_defect(p, seed=0)
        area_px = int(inst.mask.labels.sum())
        expected = np.pi * (p.radius_mm * p.resolution) ** 2
        assert abs(area_px - expected) / expected < 0.02

    def test_depth_linearity(self):
        p1 = clean_params(depth_mm=0.2)
        p2 = clean_params(depth_mm=0.6)
        h1 = generate_defect(p1, seed=3).height.heights
        h2 = generate_defect(p2, seed=3).height.heights
        assert np.abs(h2 - 3.0 * h1).max() < 1e-12

    def test_profile_power_shapes_walls(self):
        shallow = generate_defect(clean_params(profile_power=2.0), 0).height.heights
        steep = generate_defect(clean_params(profile_power=0.5), 0).height.heights
        # same extreme depth, but the steep profile holds more volume
        assert shallow.min() == steep.min()
        assert steep.sum() < shallow.sum()

    def test_heights_never_positive(self, rng):
        ranges = DefectParamRanges()
        for k in range(20):
            inst = generate_defect(sample_params(ranges, rng), seed=k)
            assert inst.height.heights.max() <= 0.0

    def test_depth_bound_hard(self, rng):
        ranges = DefectParamRanges()
        for k in range(20):
            p = sample_params(ranges, rng)
            d = -generate_defect(p, seed=k).height.heights.min()
            assert d <= p.depth_mm * (1.0 + p.floor_amplitude) + 1e-12
            assert d >= p.depth_mm * (1.0 - p.floor_amplitude) - 1e-12

    def test_rim_stays_in_grid(self, rng):
        # border pixels must stay untouched: the padding absorbs edge noise
        ranges = DefectParamRanges()
        for k in range(20):
            h = generate_defect(sample_params(ranges, rng), seed=k).height.heights
            assert h[0].max() == 0.0 and h[-1].max() == 0.0
            assert h[:, 0].max() == 0.0 and h[:, -1].max() == 0.0


class TestMask:
    def test_mask_height_consistency(self, rng):
        ranges = DefectParamRanges()
        for k in range(50):
            inst = generate_defect(sample_params(ranges, rng), seed=k)
            expected = inst.height.heights < -MASK_EPSILON_MM
            assert np.array_equal(inst.mask.labels.astype(bool), expected)

    def test_mask_binary(self):
        inst = generate_defect(clean_params(), 0)
        assert set(np.unique(inst.mask.labels)) <= {0, 1}


class TestDeterminism:
    def test_same_seed_identical(self):
        p = DefectParams()
        a = generate_defect(p, seed=11)
        b = generate_defect(p, seed=11)
        assert np.array_equal(a.height.heights, b.height.heights)
        assert np.array_equal(a.mask.labels, b.mask.labels)

    def test_different_seed_differs(self):
        p = DefectParams(edge_amplitude=0.3, floor_amplitude=0.2)
        a = generate_defect(p, seed=1)
        b = generate_defect(p, seed=2)
        assert not np.array_equal(a.height.heights, b.height.heights)

    def test_edge_and_floor_channels_independent(self):
        # zeroing one channel must not change how the other is seeded
        p_edge = DefectParams(edge_amplitude=0.3, floor_amplitude=0.0)
        p_both = DefectParams(edge_amplitude=0.3, floor_amplitude=0.0,
                              floor_noise=NoiseSpec(kind="turbulence", seed=999))
        a = generate_defect(p_edge, seed=5)
        b = generate_defect(p_both, seed=5)
        assert np.array_equal(a.height.heights, b.height.heights)


class TestErrors:
    def test_resolution_too_low(self):
        with pytest.raises(ResolutionTooLow):
            generate_defect(clean_params(radius_mm=0.1, resolution=10.0), 0)

    def test_param_validation(self):
        with pytest.raises(ValueError):
            DefectParams(radius_mm=0.0)
        with pytest.raises(ValueError):
            DefectParams(depth_mm=-0.1)
        with pytest.raises(ValueError):
            DefectParams(edge_amplitude=1.0)
        with pytest.raises(ValueError):
            DefectParams(floor_amplitude=-0.2)
        with pytest.raises(ValueError):
            DefectParams(profile_power=0.0)

    def test_range_validation(self):
        with pytest.raises(InvalidRange):
            DefectParamRanges(radius_mm=(1.0, 0.5))
        with pytest.raises(InvalidRange):
            DefectParamRanges(kinds=())


class TestSampling:
    def test_within_ranges(self, rng):
        ranges = DefectParamRanges(radius_mm=(0.4, 0.6), depth_mm=(0.2, 0.3))
        for _ in range(50):
            p = sample_params(ranges, rng)
            assert 0.4 <= p.radius_mm <= 0.6
            assert 0.2 <= p.depth_mm <= 0.3
            assert p.edge_noise.kind in ranges.kinds
            assert ranges.octaves[0] <= p.floor_noise.octaves <= ranges.octaves[1]

    def test_degenerate_range_is_constant(self, rng):
        ranges = DefectParamRanges(radius_mm=(0.5, 0.5))
        assert sample_params(ranges, rng).radius_mm == 0.5


def test_instance_from_height_map():
    h = np.zeros((11, 11))
    h[5, 5] = -0.3
    inst = instance_from_height_map(HeightMap(h, resolution=20.0))
    assert inst.mask.labels[5, 5] == 1
    assert inst.mask.labels.sum() == 1
    assert inst.params.depth_mm == 0.3
