"""File formats: raw/PGM images, sparse triplet text, CSV tables."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .grid import Grid, Image


def write_raw(path, img: Image) -> Path:
    """Little-endian float64, x fastest, plus a ``.json`` header ``{dim, N}``."""
    path = Path(path)
    img.values.astype("<f8").tofile(path)
    path.with_suffix(".json").write_text(json.dumps({"dim": img.grid.dim, "N": img.grid.N}))
    return path


def read_raw(path) -> Image:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    grid = Grid(int(header["dim"]), int(header["N"]))
    values = np.fromfile(path, dtype="<f8")
    if values.size != grid.n:
        raise InvalidArgument(f"{path}: expected {grid.n} values, found {values.size}")
    return Image(grid, values)


def write_pgm(path, img: Image) -> Path:
    """16-bit binary PGM of a 2D image.

    Values are mapped affinely onto 0..65535; ``<path>.scale.txt`` records
    ``vmin vmax`` so that ``value = vmin + (vmax - vmin) * pixel / 65535``.
    The first image row is the top (largest y).
    """
    if img.grid.dim != 2:
        raise InvalidArgument("PGM export is 2D only")
    path = Path(path)
    arr = img.as_array().T[::-1]  # rows = y descending, columns = x
    vmin, vmax = float(arr.min()), float(arr.max())
    span = vmax - vmin if vmax > vmin else 1.0
    pix = np.rint((arr - vmin) / span * 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n65535\n".encode("ascii"))
        fh.write(pix.tobytes())
    Path(str(path) + ".scale.txt").write_text(f"{vmin!r} {vmax!r}\n")
    return path


def read_pgm(path) -> Image:
    path = Path(path)
    raw = path.read_bytes()
    # header: magic, width, height, maxval, then exactly one whitespace byte
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise InvalidArgument(f"{path}: not a binary PGM")
    width, height, maxval = (int(f) for f in fields[1:])
    body = raw[pos + 1: pos + 1 + 2 * width * height]
    pix = np.frombuffer(body, dtype=">u2").reshape(height, width)
    vmin, vmax = map(float, Path(str(path) + ".scale.txt").read_text().split())
    span = vmax - vmin if vmax > vmin else 1.0
    arr = vmin + pix.astype(float) / maxval * span
    grid = Grid(2, width)
    return Image(grid, grid.flatten(arr[::-1].T))


def write_triplets(path, mat) -> Path:
    """Header ``m n nnz`` then one ``row col value`` line per entry."""
    coo = sp.coo_matrix(mat)
    with open(path, "w") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")
    return Path(path)


def read_triplets(path) -> sp.csr_matrix:
    with open(path) as fh:
        m, n, nnz = map(int, fh.readline().split())
        body = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if body.shape[0] != nnz:
        raise InvalidArgument(f"{path}: header says {nnz} entries, found {body.shape[0]}")
    return sp.csr_matrix((body[:, 2], (body[:, 0].astype(int), body[:, 1].astype(int))), shape=(m, n))


def write_csv(path, rows, fieldnames) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fieldnames})
    return Path(path)


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
