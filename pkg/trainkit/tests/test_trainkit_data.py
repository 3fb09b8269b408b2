import json
import struct

import numpy as np
import pytest

from trainkit.data import DegenerateDepthWarning, load_pairs, minmax_normalize
from trainkit.exr import read_exr


class TestNormalization:
    def test_range_and_endpoints(self, rng=np.random.default_rng(3)):
        out = minmax_normalize(rng.normal(size=(16, 16)).astype(np.float32))
        assert out.min() == -1.0 and out.max() == 1.0

    def test_constant_raster_warns_and_zeroes(self):
        with pytest.warns(DegenerateDepthWarning):
            out = minmax_normalize(np.full((4, 4), 2.5, dtype=np.float32))
        assert np.array_equal(out, np.zeros((4, 4), dtype=np.float32))


class TestExrReader:
    def _write_minimal_exr(self, path, arr):
        """Hand-packed single-channel uncompressed EXR, per the documented
        dataset format; independent of any writer implementation."""
        arr = np.asarray(arr, dtype="<f4")
        h, w = arr.shape

        def attr(name, typ, data):
            return name + b"\0" + typ + b"\0" + struct.pack("<i", len(data)) + data

        chlist = b"Z\0" + struct.pack("<iBBBBii", 2, 0, 0, 0, 0, 1, 1) + b"\0"
        box = struct.pack("<4i", 0, 0, w - 1, h - 1)
        header = (
            attr(b"channels", b"chlist", chlist)
            + attr(b"compression", b"compression", b"\x00")
            + attr(b"dataWindow", b"box2i", box)
            + attr(b"displayWindow", b"box2i", box)
            + attr(b"lineOrder", b"lineOrder", b"\x00")
            + attr(b"pixelAspectRatio", b"float", struct.pack("<f", 1.0))
            + attr(b"screenWindowCenter", b"v2f", struct.pack("<2f", 0, 0))
            + attr(b"screenWindowWidth", b"float", struct.pack("<f", 1.0))
            + b"\0"
        )
        pre = b"\x76\x2f\x31\x01" + struct.pack("<i", 2) + header
        data_start = len(pre) + 8 * h
        chunk = 8 + 4 * w
        offsets = struct.pack("<%dQ" % h, *(data_start + i * chunk for i in range(h)))
        chunks = b"".join(
            struct.pack("<ii", y, 4 * w) + arr[y].tobytes() for y in range(h)
        )
        path.write_bytes(pre + offsets + chunks)

    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(8)
        arr = rng.normal(size=(9, 13)).astype(np.float32)
        p = tmp_path / "z.exr"
        self._write_minimal_exr(p, arr)
        assert np.array_equal(read_exr(p), arr)

    def test_garbage_rejected(self, tmp_path):
        p = tmp_path / "bad.exr"
        p.write_bytes(b"nope")
        with pytest.raises(ValueError):
            read_exr(p)


class TestLoadPairs:
    def test_normalized_range_with_endpoints(self, mini_dataset):
        pairs = load_pairs(mini_dataset, "train")
        assert pairs.fringe.shape[1:] == (1, 64, 64)
        assert pairs.depth.shape == pairs.fringe.shape
        for stack in (pairs.fringe, pairs.depth):
            assert stack.min() >= -1.0 and stack.max() <= 1.0
            per_image_min = stack.reshape(len(stack), -1).min(axis=1)
            per_image_max = stack.reshape(len(stack), -1).max(axis=1)
            assert np.all(per_image_min == -1.0)
            assert np.all(per_image_max == 1.0)

    def test_split_labels_respected(self, mini_dataset):
        train = load_pairs(mini_dataset, "train")
        test = load_pairs(mini_dataset, "test")
        assert len(train) + len(test) == 8
        assert not set(train.model_ids) & set(test.model_ids)

    def test_dataset_depths_load_finite(self, mini_dataset):
        manifest = json.loads((mini_dataset / "manifest.json").read_text())
        first = manifest["entries"][0]
        depth = read_exr(mini_dataset / first["depth_path"])
        assert np.isfinite(depth).all()
        assert depth.shape == (64, 64)

    def test_unknown_split_rejected(self, mini_dataset):
        with pytest.raises(ValueError):
            load_pairs(mini_dataset, "validation")
