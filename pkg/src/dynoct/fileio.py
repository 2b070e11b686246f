"""On-disk formats.

Binary matrices carry a single ASCII header line followed by little-endian
float64 data in row-major order. CSVs use ',' separators, '.' decimals and
LF line endings; floats are written with ``repr`` so they read back exactly.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np

from dynoct.medium import CollagenField, PixelGrid
from dynoct.sep import CasoratiMatrix

CASORATI_MAGIC = "DYNOCT-CASORATI v1"
FIELD_MAGIC = "DYNOCT-FIELD v1"


def _parse_header(line: bytes, magic: str, path) -> dict[str, str]:
    text = line.decode("ascii", errors="replace").rstrip("\n")
    if not text.startswith(magic + " "):
        raise ValueError(f"{path}: not a {magic} file")
    return dict(re.findall(r"(\w+)=(\S+)", text[len(magic):]))


def _read_payload(fh, count: int, path) -> np.ndarray:
    data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != count:
        raise ValueError(f"{path}: expected {count} values, found {data.size}")
    return data.astype(np.float64)


def write_casorati(path, A: CasoratiMatrix) -> None:
    header = (f"{CASORATI_MAGIC} nx={A.n_x} nt={A.n_t} "
              f"grid={A.grid.rows}x{A.grid.cols}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(A.data, dtype="<f8").tobytes())


def read_casorati(path) -> CasoratiMatrix:
    with open(path, "rb") as fh:
        meta = _parse_header(fh.readline(), CASORATI_MAGIC, path)
        try:
            nx, nt = int(meta["nx"]), int(meta["nt"])
            rows, cols = (int(v) for v in meta["grid"].split("x"))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"{path}: malformed header") from exc
        data = _read_payload(fh, nx * nt, path).reshape(nx, nt)
    return CasoratiMatrix(data, PixelGrid(rows, cols))


def write_field(path, f: CollagenField) -> None:
    # z0/dz/v0/corr_len/seed ride along after the required nx/nz keys
    header = (f"{FIELD_MAGIC} nx={f.n_pixels} nz={f.z_count} z0={f.z0!r} dz={f.dz!r} "
              f"v0={f.v0!r} corr_len={f.corr_len!r} seed={f.seed}\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(f.q, dtype="<f8").tobytes())


def read_field(path) -> CollagenField:
    with open(path, "rb") as fh:
        meta = _parse_header(fh.readline(), FIELD_MAGIC, path)
        nx, nz = int(meta["nx"]), int(meta["nz"])
        q = _read_payload(fh, nx * nz, path).reshape(nx, nz)
    z0 = float(meta.get("z0", -1.0))
    dz = float(meta.get("dz", -2.0 * z0 / (nz - 1)))
    return CollagenField(q=q, z0=z0, dz=dz, corr_len=float(meta.get("corr_len", 0.0)),
                         v0=float(meta.get("v0", 0.0)), seed=int(meta.get("seed", 0)))


def write_map_csv(path, image) -> None:
    image = np.atleast_2d(np.asarray(image, dtype=float))
    lines = [",".join(repr(float(v)) for v in row) for row in image]
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def read_map_csv(path) -> np.ndarray:
    rows = [line for line in Path(path).read_text().splitlines() if line.strip()]
    if not rows:
        raise ValueError(f"{path}: empty map")
    table = [[float(v) for v in row.split(",")] for row in rows]
    if len({len(r) for r in table}) != 1:
        raise ValueError(f"{path}: ragged rows")
    return np.array(table)


def write_table(path, header: list[str], rows) -> None:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                            for v in row))
    Path(path).write_text("\n".join(out) + "\n", newline="\n")


def read_table(path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:] if line]


def pgm16_levels(image) -> np.ndarray:
    """Map ``[min, max]`` linearly onto ``[0, 65535]``, rounding halves up."""
    x = np.asarray(image, dtype=float)
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return np.zeros(x.shape, dtype=np.uint16)
    return np.floor((x - lo) / (hi - lo) * 65535.0 + 0.5).astype(np.uint16)


def write_pgm16(path, image) -> None:
    """Binary (P5) PGM with maxval 65535; samples are big-endian per the PGM format."""
    levels = np.atleast_2d(pgm16_levels(image))
    h, w = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(levels.astype(">u2").tobytes())


def read_pgm16(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m or int(m.group(3)) != 65535:
        raise ValueError(f"{path}: not a 16-bit binary PGM")
    w, h = int(m.group(1)), int(m.group(2))
    return np.frombuffer(data[m.end():], dtype=">u2").reshape(h, w).astype(np.uint16)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
