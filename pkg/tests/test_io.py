import json

import numpy as np
import pytest

from tvrelax import io


def test_pgm_round_trip(tmp_path):
    u = np.random.default_rng(0).integers(0, 256, (5, 7)) / 255
    path = tmp_path / "a.pgm"
    io.write_pgm(path, u)
    np.testing.assert_allclose(io.read_pgm(path), u)
    assert path.read_bytes().startswith(b"P5\n7 5\n255\n")


def test_ascii_pgm_with_comments(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_bytes(b"P2\n# comment\n3 2\n# another\n4\n0 1 2\n3 4 # tail\n0\n")
    np.testing.assert_allclose(io.read_pgm(path), [[0, 0.25, 0.5], [0.75, 1.0, 0.0]])


@pytest.mark.parametrize("content", [b"P6\n1 1\n255\n\x00\x00\x00", b"hello", b"P5\n2 2\n255\n\x00",
                                     b"P5\n1 1\n65535\n\x00\x00", b"P2\n2 2\n255\n1 2 3\n"])
def test_malformed_pgm(tmp_path, content):
    path = tmp_path / "bad.pgm"
    path.write_bytes(content)
    with pytest.raises(io.ImageFormatError):
        io.read_pgm(path)


def test_to_uint8_rounding():
    np.testing.assert_array_equal(io.to_uint8([-0.5, 0.0, 0.5, 1.0, 2.0]), [0, 0, 128, 255, 255])


def test_write_pgm_needs_2d(tmp_path):
    with pytest.raises(ValueError):
        io.write_pgm(tmp_path / "a.pgm", np.zeros(4))


def test_png_round_trip(tmp_path):
    pytest.importorskip("PIL")
    u = np.random.default_rng(1).integers(0, 256, (6, 4)) / 255
    path = tmp_path / "a.png"
    io.write_field(path, u)
    np.testing.assert_allclose(io.read_field(path), u)
    first = path.read_bytes()
    io.write_field(path, u)
    assert path.read_bytes() == first


def test_csv_round_trip_exact(tmp_path):
    u = np.random.default_rng(2).standard_normal((3, 4))
    path = tmp_path / "g.csv"
    io.write_field(path, u)
    np.testing.assert_array_equal(io.read_field(path), u)


def test_csv_one_dimensional(tmp_path):
    path = tmp_path / "g.csv"
    io.write_grid_csv(path, np.array([0.5, -1.0, 2.0]))
    assert path.read_text() == "0.5,-1.0,2.0\n"
    np.testing.assert_array_equal(io.read_grid_csv(path), [0.5, -1.0, 2.0])
    col = tmp_path / "c.csv"
    col.write_text("1\n2\n3\n")
    assert io.read_grid_csv(col).shape == (3,)


def test_csv_nonfinite_rejected(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("1,nan\n2,3\n")
    with pytest.raises(ValueError):
        io.read_grid_csv(path)


def test_residual_csv(tmp_path):
    path = tmp_path / "r.csv"
    io.write_residual_csv(path, [(0, 1.0, 0), (1, 0.25, 7)])
    assert path.read_text() == "iter,residual,pcg_iters\n0,1.0,0\n1,0.25,7\n"


def test_json_nonfinite_and_numpy(tmp_path):
    path = tmp_path / "r.json"
    io.write_json(path, {"b": np.float64(np.nan), "a": np.arange(2), "c": (1, np.int64(2))})
    assert json.loads(path.read_text()) == {"a": [0, 1], "b": None, "c": [1, 2]}
    assert path.read_text().index('"a"') < path.read_text().index('"b"')


def test_sha256(tmp_path):
    path = tmp_path / "x"
    path.write_bytes(b"abc")
    assert io.sha256_file(path) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_ensure_parent(tmp_path):
    target = tmp_path / "a" / "b" / "c.txt"
    io.ensure_parent(target)
    assert target.parent.is_dir()
