import numpy as np
import pytest
import scipy.sparse as sp

from tvoed.errors import InvalidArgument
from tvoed.grid import Image, build_grid
from tvoed.io import (
    read_csv, read_pgm, read_raw, read_triplets, write_csv, write_pgm, write_raw, write_triplets,
)
from tvoed.sim import shapes2d


def test_raw_roundtrip(tmp_path, rng):
    g = build_grid(3, 5)
    img = Image(g, rng.normal(size=g.n))
    back = read_raw(write_raw(tmp_path / "a.raw", img))
    assert back.grid == g and np.array_equal(back.values, img.values)


def test_raw_size_mismatch(tmp_path):
    p = write_raw(tmp_path / "a.raw", Image.constant(build_grid(2, 4), 1.0))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(InvalidArgument):
        read_raw(p)


def test_pgm_roundtrip(tmp_path, rng):
    g = build_grid(2, 33)
    img = Image(g, rng.uniform(-1, 2, size=g.n))
    back = read_pgm(write_pgm(tmp_path / "a.pgm", img))
    assert np.max(np.abs(back.values - img.values)) <= 3.0 / 65535
    assert read_pgm(write_pgm(tmp_path / "b.pgm", shapes2d(g))).values.max() == 1.0


def test_pgm_orientation(tmp_path):
    g = build_grid(2, 4)
    u = np.zeros(g.n)
    u[g.index(0, 3)] = 1.0  # top-left in image coordinates
    write_pgm(tmp_path / "c.pgm", Image(g, u))
    raw = (tmp_path / "c.pgm").read_bytes()
    pix = np.frombuffer(raw[-32:], dtype=">u2").reshape(4, 4)
    assert pix[0, 0] == 65535 and pix.sum() == 65535


def test_pgm_rejects_3d(tmp_path):
    with pytest.raises(InvalidArgument):
        write_pgm(tmp_path / "x.pgm", Image.constant(build_grid(3, 3), 0.0))


def test_triplets_roundtrip(tmp_path, rng):
    M = sp.random(7, 11, density=0.3, random_state=rng, format="csr")
    back = read_triplets(write_triplets(tmp_path / "m.txt", M))
    assert back.shape == M.shape and abs(back - M).max() == 0
    empty = read_triplets(write_triplets(tmp_path / "e.txt", sp.csr_matrix((3, 2))))
    assert empty.shape == (3, 2) and empty.nnz == 0


def test_csv_roundtrip(tmp_path):
    rows = [{"a": 1, "b": "x"}, {"a": 2}]
    out = read_csv(write_csv(tmp_path / "t.csv", rows, ["a", "b"]))
    assert out == [{"a": "1", "b": "x"}, {"a": "2", "b": ""}]
