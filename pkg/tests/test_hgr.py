import numpy as np
import pytest

from hexwave.hgr import HgrFormatError, read_hgr, write_hgr


def test_roundtrip_bit_exact(tmp_path, rng):
    comps = [rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7))
             for _ in range(3)]
    path = tmp_path / "f.hgr"
    write_hgr(path, comps, -1.0, 2.0, 0.25, 0.5)
    # bit-identity of a rewrite
    first = path.read_bytes()
    back = read_hgr(path)
    write_hgr(path, back.components, back.x0, back.y0, back.dx, back.dy)
    assert path.read_bytes() == first
    for a, b in zip(comps, back.components):
        assert np.array_equal(a, b)
    assert (back.x0, back.y0, back.dx, back.dy) == (-1.0, 2.0, 0.25, 0.5)


def test_header_layout(tmp_path):
    path = tmp_path / "h.hgr"
    write_hgr(path, [np.zeros((2, 3), complex)], 0.0, 0.0, 1.0, 1.0)
    raw = path.read_bytes()
    assert raw[:4] == b"HGR1"
    assert int.from_bytes(raw[4:8], "little") == 1      # version
    assert int.from_bytes(raw[8:12], "little") == 1     # n_components
    assert int.from_bytes(raw[12:16], "little") == 2    # nx
    assert int.from_bytes(raw[16:20], "little") == 3    # ny
    assert len(raw) == 20 + 32 + 2 * 3 * 16


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.hgr"
    path.write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(HgrFormatError, match="magic"):
        read_hgr(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "t.hgr"
    write_hgr(path, [np.ones((4, 4), complex)], 0.0, 0.0, 1.0, 1.0)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(HgrFormatError, match="payload"):
        read_hgr(path)


def test_mismatched_shapes_rejected(tmp_path):
    with pytest.raises(HgrFormatError, match="shape"):
        write_hgr(tmp_path / "m.hgr",
                  [np.zeros((2, 2), complex), np.zeros((3, 3), complex)],
                  0.0, 0.0, 1.0, 1.0)
