import numpy as np
import pytest

from castsim.errors import DimensionMismatch, EmptyRaster, UnsupportedFormat
from castsim.imaging import (
    LUMA_WEIGHTS,
    GrayImage,
    HeightMap,
    MaskMap,
    NormalMap,
    decode_normal_map,
    encode_normal_map,
    load_height_map,
    load_image,
    load_image_stack,
    save_height_map,
    save_image,
)
from conftest import random_unit_normals


def test_encode_z_axis():
    nm = NormalMap(np.array([[[0.0, 0.0, 1.0]]]))
    assert tuple(encode_normal_map(nm)[0, 0]) == (128, 128, 255)


def test_encode_x_axis():
    nm = NormalMap(np.array([[[1.0, 0.0, 0.0]]]))
    assert tuple(encode_normal_map(nm)[0, 0]) == (255, 128, 128)


def test_decode_axes():
    nm = decode_normal_map(np.array([[[128, 128, 255], [255, 128, 128]]],
                                    dtype=np.uint8))
    assert np.abs(nm.normals[0, 0] - [0, 0, 1]).max() < 0.01
    assert np.abs(nm.normals[0, 1] - [1, 0, 0]).max() < 0.01


def test_round_trip_error_bound(rng):
    # oracle: exhaustive sampling of random unit vectors
    n = random_unit_normals(10_000, rng).reshape(100, 100, 3)
    nm = NormalMap(n)
    back = decode_normal_map(encode_normal_map(nm))
    err = np.abs(back.normals - n).max()
    assert err <= 2.0 / 255.0


def test_decode_zero_vector_invalid():
    # 127.5 decodes to the exact zero vector (float rasters are accepted)
    nm = decode_normal_map(np.full((1, 1, 3), 127.5))
    assert not nm.valid[0, 0]
    assert tuple(nm.normals[0, 0]) == (0.0, 0.0, 1.0)


def test_decode_empty_raises():
    with pytest.raises(EmptyRaster):
        decode_normal_map(np.zeros((0, 0, 3), dtype=np.uint8))


def test_save_load_16bit_lossless(tmp_path, rng):
    img = GrayImage(rng.random((13, 9)))
    save_image(img, tmp_path / "a.png", bit_depth=16)
    back = load_image(tmp_path / "a.png")
    quantized = np.floor(img.data * 65535 + 0.5) / 65535
    assert np.array_equal(back.data, quantized)


def test_save_load_8bit_lossless(tmp_path, rng):
    img = GrayImage(rng.random((5, 7)))
    save_image(img, tmp_path / "a.png", bit_depth=8)
    back = load_image(tmp_path / "a.png")
    quantized = np.floor(img.data * 255 + 0.5) / 255
    assert np.allclose(back.data, quantized, atol=1e-12)


def test_rgb_luminance_conversion(tmp_path, rng):
    from PIL import Image

    rgb = (rng.random((6, 8, 3)) * 255).astype(np.uint8)
    Image.fromarray(rgb, mode="RGB").save(tmp_path / "c.png")
    img = load_image(tmp_path / "c.png")
    # oracle: direct per-pixel weighted sum
    expected = (rgb / 255.0) @ np.asarray(LUMA_WEIGHTS)
    assert np.abs(img.data - expected).max() < 1e-12


def test_empty_file_raises(tmp_path):
    (tmp_path / "empty.png").write_bytes(b"")
    with pytest.raises(EmptyRaster):
        load_image(tmp_path / "empty.png")


def test_garbage_file_raises(tmp_path):
    (tmp_path / "bad.png").write_bytes(b"not a png at all")
    with pytest.raises(UnsupportedFormat):
        load_image(tmp_path / "bad.png")


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.png")


def test_stack_dimension_mismatch(tmp_path, rng):
    save_image(GrayImage(rng.random((4, 4))), tmp_path / "a.png")
    save_image(GrayImage(rng.random((5, 4))), tmp_path / "b.png")
    with pytest.raises(DimensionMismatch):
        load_image_stack([tmp_path / "a.png", tmp_path / "b.png"])


def test_height_map_sidecar_round_trip(tmp_path, rng):
    hm = HeightMap(rng.random((9, 9)) * -0.5, resolution=20.0)
    save_height_map(hm, tmp_path / "h.png")
    assert (tmp_path / "h.png.json").exists()
    back = load_height_map(tmp_path / "h.png")
    assert back.resolution == 20.0
    assert np.abs(back.heights - hm.heights).max() < 0.5 / 65535 + 1e-12


def test_types_reject_nan():
    with pytest.raises(ValueError):
        GrayImage(np.full((2, 2), np.nan))
    with pytest.raises(ValueError):
        HeightMap(np.array([[np.inf]]))
    with pytest.raises(ValueError):
        NormalMap(np.full((1, 1, 3), np.nan))


def test_gray_image_range_checked():
    with pytest.raises(ValueError):
        GrayImage(np.array([[1.5]]))
    with pytest.raises(ValueError):
        GrayImage(np.array([[-0.1]]))


def test_normal_map_invalid_placeholder():
    n = np.dstack([np.ones((2, 2)), np.zeros((2, 2)), np.zeros((2, 2))])
    valid = np.array([[True, False], [False, True]])
    nm = NormalMap(n, valid)
    assert tuple(nm.normals[0, 1]) == (0.0, 0.0, 1.0)
    assert tuple(nm.normals[0, 0]) == (1.0, 0.0, 0.0)


def test_mask_map_rejects_negative():
    with pytest.raises(ValueError):
        MaskMap(np.array([[-1]]))
