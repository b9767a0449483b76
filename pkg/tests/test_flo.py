import struct

import numpy as np
import pytest

from celforge.errors import FormatError, InvalidInputError
from celforge.flo import read_flo, write_flo


def test_round_trip_bit_exact(tmp_path, rng):
    path = tmp_path / "f.flo"
    for _ in range(100):
        h, w = rng.integers(1, 20, 2)
        f = (rng.standard_normal((h, w, 2)) * 50).astype(np.float32)
        write_flo(f, path)
        g = read_flo(path)
        assert g.dtype == np.float32 and g.shape == f.shape
        assert g.tobytes() == f.tobytes()


def test_zero_field_size(tmp_path):
    write_flo(np.zeros((3, 5, 2), np.float32), tmp_path / "z.flo")
    assert (tmp_path / "z.flo").stat().st_size == 132


def test_hand_made_bytes(tmp_path):
    vals = [1.5, -2.0, 0.25, 3.0, -0.5, 7.0, 100.0, -100.0]
    raw = struct.pack("<fii", 202021.25, 2, 2) + struct.pack("<8f", *vals)
    (tmp_path / "h.flo").write_bytes(raw)
    f = read_flo(tmp_path / "h.flo")
    np.testing.assert_array_equal(f[0, 0], [1.5, -2.0])
    np.testing.assert_array_equal(f[0, 1], [0.25, 3.0])
    np.testing.assert_array_equal(f[1, 0], [-0.5, 7.0])
    np.testing.assert_array_equal(f[1, 1], [100.0, -100.0])
    write_flo(f, tmp_path / "again.flo")
    assert (tmp_path / "again.flo").read_bytes() == raw


def test_width_and_height_order(tmp_path):
    write_flo(np.zeros((2, 7, 2), np.float32), tmp_path / "o.flo")
    assert struct.unpack("<fii", (tmp_path / "o.flo").read_bytes()[:12]) == (202021.25, 7, 2)


def test_bad_magic(tmp_path):
    (tmp_path / "m.flo").write_bytes(struct.pack("<fii", 0.0, 1, 1) + bytes(8))
    with pytest.raises(FormatError, match="magic"):
        read_flo(tmp_path / "m.flo")


@pytest.mark.parametrize("cut", [4, 11, 20])
def test_truncated(tmp_path, cut):
    write_flo(np.ones((2, 2, 2), np.float32), tmp_path / "t.flo")
    raw = (tmp_path / "t.flo").read_bytes()
    (tmp_path / "t.flo").write_bytes(raw[:cut])
    with pytest.raises(FormatError):
        read_flo(tmp_path / "t.flo")


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite_rejected(tmp_path, bad):
    f = np.zeros((2, 2, 2), np.float32)
    f[1, 0, 1] = bad
    with pytest.raises(InvalidInputError):
        write_flo(f, tmp_path / "n.flo")
    assert not (tmp_path / "n.flo").exists()


def test_wrong_shape_rejected(tmp_path):
    with pytest.raises(InvalidInputError):
        write_flo(np.zeros((2, 2, 3)), tmp_path / "s.flo")
