"""File formats: point-cloud CSV, the binary direction-set cache, matrix CSV.

Direction-set cache layout (all integers little-endian)::

    b"SWDS"            4-byte magic
    version            u8, currently 1
    M                  u32
    d                  u32
    payload            M*d float64, row-major (one direction per row)
    trailer            UTF-8 JSON: {"spec": {...}, "seed": int | null, "degenerate": int}
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .sphere import DirectionSet, PointCloud, SamplerSpec

MAGIC = b"SWDS"
VERSION = 1
_HEADER = struct.Struct("<4sBII")


def read_point_cloud(path) -> PointCloud:
    """One point per line, comma separated; lines starting with '#' are skipped."""
    try:
        pts = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read point cloud {path}: {exc}") from None
    return PointCloud(pts)


def read_diagram(path) -> np.ndarray:
    """Like :func:`read_point_cloud` but allows an empty file (empty diagram)."""
    try:
        pts = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read diagram {path}: {exc}") from None
    if pts.size == 0:
        return np.empty((0, 2))
    return pts


def write_point_cloud(path, cloud: PointCloud, header: str | None = None) -> None:
    with open(path, "w", newline="\n") as fh:
        if header:
            fh.write("# " + header + "\n")
        np.savetxt(fh, cloud.points, delimiter=",", fmt="%.17g")


def save_directions(path, dirs: DirectionSet) -> None:
    trailer = json.dumps(
        {"spec": dirs.spec.to_json(), "seed": dirs.seed, "degenerate": dirs.degenerate},
        sort_keys=True,
    ).encode("utf-8")
    payload = np.ascontiguousarray(dirs.directions, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dirs.m, dirs.dim))
        fh.write(payload)
        fh.write(trailer)


def load_directions(path) -> DirectionSet:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated direction file")
    magic, version, m, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    end = _HEADER.size + 8 * m * d
    if len(raw) < end:
        raise DataError(f"{path}: payload shorter than {m}x{d} doubles")
    dirs = np.frombuffer(raw, dtype="<f8", count=m * d, offset=_HEADER.size).reshape(m, d)
    try:
        meta = json.loads(raw[end:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: bad JSON trailer: {exc}") from None
    return DirectionSet(
        dirs.astype(np.float64),
        SamplerSpec.from_json(meta["spec"]),
        meta.get("seed"),
        meta.get("degenerate", 0),
    )


def write_matrix(path, matrix: np.ndarray) -> None:
    """Square numeric matrix, no header."""
    with open(path, "w", newline="\n") as fh:
        np.savetxt(fh, np.asarray(matrix), delimiter=",", fmt="%.17g")


def read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
