import numpy as np
import pytest

from silhuetta.image_io import (ImageFormatError, load_image, load_mask_pgm,
                                load_pgm, load_ppm, save_mask_pgm, save_pgm,
                                save_ppm)


def test_pgm_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(33, 47), dtype=np.uint8)
    p = tmp_path / "x.pgm"
    save_pgm(p, img)
    assert np.array_equal(load_pgm(p), img)


def test_ppm_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, size=(21, 17, 3), dtype=np.uint8)
    p = tmp_path / "x.ppm"
    save_ppm(p, img)
    assert np.array_equal(load_ppm(p), img)


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    mask = rng.random((15, 19)) > 0.5
    p = tmp_path / "m.pgm"
    save_mask_pgm(p, mask)
    raw = load_pgm(p)
    assert set(np.unique(raw)) <= {0, 255}
    assert np.array_equal(load_mask_pgm(p), mask)


def test_header_comments_are_skipped(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n2 2\n# another\n255\n\x01\x02\x03\x04")
    img = load_pgm(p)
    assert np.array_equal(img, np.array([[1, 2], [3, 4]], dtype=np.uint8))


def test_load_image_expands_grayscale(tmp_path):
    p = tmp_path / "g.pgm"
    save_pgm(p, np.array([[7, 9]], dtype=np.uint8))
    rgb = load_image(p)
    assert rgb.shape == (1, 2, 3)
    assert np.array_equal(rgb[:, :, 0], rgb[:, :, 2])


def test_truncated_raster_rejected(tmp_path):
    p = tmp_path / "t.pgm"
    p.write_bytes(b"P5\n4 4\n255\n\x00\x00")
    with pytest.raises(ImageFormatError, match="raster"):
        load_pgm(p)


def test_wrong_magic_rejected(tmp_path):
    p = tmp_path / "w.pgm"
    p.write_bytes(b"P3\n1 1\n255\n0")
    with pytest.raises(ImageFormatError):
        load_pgm(p)
    with pytest.raises(ImageFormatError):
        load_image(p)


def test_unsupported_maxval_rejected(tmp_path):
    p = tmp_path / "m.pgm"
    p.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
    with pytest.raises(ImageFormatError, match="maxval"):
        load_pgm(p)
