import numpy as np
import pytest

from castsim.errors import InvalidSlant, NoValidPixels, TooFewLights
from castsim.imaging import GrayImage, NormalMap
from castsim.stereo import (
    ImageStack,
    LightRig,
    SolverConfig,
    integrability_report,
    octagon_rig,
    render_lambertian,
    solve_normals,
)


def analytic_sphere(res=128, cap=0.81):
    """Normals of a unit hemisphere; `cap` limits r^2 so slopes stay away
    from the shadowed rim."""
    y, x = np.mgrid[0:res, 0:res]
    c = (res - 1) / 2
    X = (x - c) / (res * 0.45)
    Y = (y - c) / (res * 0.45)
    r2 = X ** 2 + Y ** 2
    inside = r2 < cap
    Z = np.sqrt(np.clip(1 - r2, 0, 1))
    n = np.dstack([X, Y, Z])
    n[~inside] = [0, 0, 1]
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return n, inside


class TestOctagonRig:
    def test_reference_rig_geometry(self):
        rig = octagon_rig(45.0, 8)
        assert rig.count == 8
        assert np.allclose(rig.directions[:, 2], np.cos(np.deg2rad(45.0)))
        az = np.degrees(np.arctan2(rig.directions[:, 1], rig.directions[:, 0]))
        steps = np.sort(az % 360)
        assert np.allclose(np.diff(steps), 45.0)

    def test_symmetry(self):
        rig = octagon_rig(45.0, 8)
        assert abs(rig.directions[:, 0].sum()) < 1e-12
        assert abs(rig.directions[:, 1].sum()) < 1e-12

    def test_rank(self):
        rig = octagon_rig(30.0, 4)
        assert np.linalg.matrix_rank(rig.directions) == 3

    def test_bad_slant(self):
        with pytest.raises(InvalidSlant):
            octagon_rig(0.0, 8)
        with pytest.raises(InvalidSlant):
            octagon_rig(90.0, 8)

    def test_too_few_lights(self):
        with pytest.raises(TooFewLights):
            octagon_rig(45.0, 2)


class TestSolveNormals:
    def test_flat_plane_exact(self):
        rig = octagon_rig(45.0, 8)
        n = np.tile([0.0, 0.0, 1.0], (8, 8, 1))
        stack = render_lambertian(n, np.full((8, 8), 0.8), rig)
        nm, am = solve_normals(stack)
        assert np.abs(nm.normals - [0, 0, 1]).max() < 1e-6
        assert np.abs(am.albedo - 0.8).max() < 1e-6

    def test_sphere_oracle(self):
        # oracle: intensities from the exact Lambertian formula on the
        # analytic sphere, solved back
        n, inside = analytic_sphere()
        rig = octagon_rig(45.0, 8)
        stack = render_lambertian(n, np.full(n.shape[:2], 0.7), rig)
        nm, am = solve_normals(stack)
        ok = inside & nm.valid
        dot = np.clip(np.einsum("hwc,hwc->hw", nm.normals, n), -1, 1)
        ang = np.degrees(np.arccos(dot))
        assert ang[ok].mean() < 0.1
        assert np.abs(am.albedo[ok] / 0.7 - 1).max() < 1e-4

    def test_shadowed_pixel_invalid(self):
        rig = octagon_rig(45.0, 8)
        intensities = np.full((1, 1, 8), 0.5)
        intensities[0, 0, :6] = 0.0  # dark in 6 of 8 lights
        images = tuple(GrayImage(intensities[..., k]) for k in range(8))
        stack = ImageStack(images, rig)
        nm, _ = solve_normals(stack, SolverConfig(min_valid_lights=3))
        assert not nm.valid[0, 0]

    def test_intensity_scaling_property(self):
        n, _ = analytic_sphere(32)
        rig = octagon_rig(45.0, 8)
        stack = render_lambertian(n, np.full((32, 32), 0.4), rig)
        nm1, am1 = solve_normals(stack)
        scaled = ImageStack(tuple(GrayImage(im.data * 2.0) for im in stack.images), rig)
        nm2, am2 = solve_normals(scaled)
        both = nm1.valid & nm2.valid
        assert np.abs(nm1.normals[both] - nm2.normals[both]).max() < 1e-9
        assert np.abs(am2.albedo[both] - 2.0 * am1.albedo[both]).max() < 1e-9

    def test_light_permutation_property(self, rng):
        n, _ = analytic_sphere(24)
        rig = octagon_rig(45.0, 8)
        stack = render_lambertian(n, np.full((24, 24), 0.6), rig)
        perm = rng.permutation(8)
        rig_p = LightRig(rig.directions[perm])
        stack_p = ImageStack(tuple(stack.images[k] for k in perm), rig_p)
        nm1, am1 = solve_normals(stack)
        nm2, am2 = solve_normals(stack_p)
        assert np.allclose(nm1.normals, nm2.normals, atol=1e-12)
        assert np.allclose(am1.albedo, am2.albedo, atol=1e-12)

    def test_validity_monotone_in_min_lights(self):
        n, _ = analytic_sphere(32, cap=0.95)
        rig = octagon_rig(60.0, 8)
        stack = render_lambertian(n, np.full((32, 32), 0.9), rig)
        prev = None
        for m in (3, 4, 5, 6, 7, 8):
            nm, _ = solve_normals(stack, SolverConfig(min_valid_lights=m))
            if prev is not None:
                assert not (nm.valid & ~prev).any()
            prev = nm.valid


class TestIntegrability:
    def test_constant_field_zero(self):
        nm = NormalMap(np.tile([0.0, 0.0, 1.0], (8, 8, 1)))
        assert integrability_report(nm) == 0.0

    def test_linear_surface_zero(self):
        # z = ax + by has the constant normal (-a, -b, 1)/|..|
        a, b = 0.3, -0.2
        n = np.tile([-a, -b, 1.0], (8, 8, 1))
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        assert integrability_report(NormalMap(n)) < 1e-6

    def test_shuffled_normals_worse(self, rng):
        y, x = np.mgrid[0:16, 0:16].astype(float)
        z = 0.1 * np.sin(x / 3) * np.cos(y / 4)
        gy, gx = np.gradient(z)
        n = np.dstack([-gx, -gy, np.ones_like(z)])
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        smooth = integrability_report(NormalMap(n))
        flat = n.reshape(-1, 3)
        shuffled = flat[rng.permutation(len(flat))].reshape(n.shape)
        assert integrability_report(NormalMap(shuffled)) > smooth

    def test_no_valid_pixels(self):
        nm = NormalMap(np.tile([0.0, 0.0, 1.0], (4, 4, 1)),
                       np.zeros((4, 4), dtype=bool))
        with pytest.raises(NoValidPixels):
            integrability_report(nm)
