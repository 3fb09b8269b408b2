import numpy as np
import pytest

from fppforge import imgio


class TestGray:
    def test_png_round_trip_at_8bit_resolution(self, tmp_path, rng):
        img = rng.uniform(size=(33, 47))
        p = tmp_path / "img.png"
        imgio.write_gray(p, img)
        back = imgio.read_gray(p)
        assert back.shape == img.shape
        assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12

    def test_quantization_is_round_to_nearest(self):
        assert imgio.quantize_u8(np.array([0.0, 1.0, 0.5, 2.0, -1.0])).tolist() == [
            0,
            255,
            128,
            255,
            0,
        ]

    def test_bmp_export(self, tmp_path):
        img = np.linspace(0, 1, 64).reshape(8, 8)
        p = tmp_path / "pattern.bmp"
        imgio.write_gray(p, img)
        assert imgio.read_gray(p).shape == (8, 8)

    def test_png_bytes_deterministic(self, rng):
        img = rng.uniform(size=(16, 16))
        assert imgio.png_bytes(img) == imgio.png_bytes(img)


class TestExr:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        img = rng.normal(size=(21, 17)).astype(np.float32)
        p = tmp_path / "depth.exr"
        imgio.write_exr(p, img)
        back = imgio.read_exr(p)
        assert back.dtype == np.float32
        assert np.array_equal(back, img)

    def test_bytes_deterministic(self, rng):
        img = rng.normal(size=(8, 8)).astype(np.float32)
        assert imgio.exr_bytes(img) == imgio.exr_bytes(img)

    def test_rejects_non_exr(self, tmp_path):
        p = tmp_path / "junk.exr"
        p.write_bytes(b"not an exr at all")
        with pytest.raises(ValueError, match="not an EXR"):
            imgio.read_exr(p)

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            imgio.exr_bytes(np.zeros(5))

    def test_magic_and_no_compression_header(self, rng):
        data = imgio.exr_bytes(rng.normal(size=(4, 4)).astype(np.float32))
        assert data[:4] == b"\x76\x2f\x31\x01"
        assert b"compression" in data
