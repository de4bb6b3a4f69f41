"""Halton and Sobol sequences, cube-to-sphere mappings and RQMC randomizations."""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from ..errors import ConfigError, MappingError, SizeError, TableExhausted
from ..sphere import DirectionSet, Kind, Mapping, Randomization, SamplerSpec
from .montecarlo import haar_orthogonal

SOBOL_BITS = 32
DEFAULT_SOBOL_TABLE = Path(__file__).resolve().parent.parent / "data" / "new-joe-kuo-6.1111"
NORMAL_CLAMP = 1e-12


@dataclass(frozen=True)
class CubePointSet:
    points: np.ndarray
    generator: Kind
    scrambled: bool = False

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def first_primes(n: int) -> list[int]:
    primes: list[int] = []
    cand = 2
    while len(primes) < n:
        if all(cand % p for p in primes if p * p <= cand):
            primes.append(cand)
        cand += 1
    return primes


def radical_inverse(index, base: int) -> np.ndarray:
    """Base-``base`` digit reversal of non-negative integers about the radix point."""
    i = np.array(index, dtype=np.int64, copy=True)
    out = np.zeros(i.shape)
    scale = 1.0 / base
    while np.any(i):
        out += (i % base) * scale
        i //= base
        scale /= base
    return out


def halton(m: int, d: int, start_index: int = 1) -> CubePointSet:
    """Rows ``start_index .. start_index+m-1`` of the Halton sequence in ``[0,1)^d``.

    Coordinate ``j`` uses the ``j``-th prime as base. Index 0 is the origin and
    is skipped by default.
    """
    if m < 1 or d < 1:
        raise SizeError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    idx = np.arange(start_index, start_index + m, dtype=np.int64)
    pts = np.column_stack([radical_inverse(idx, b) for b in first_primes(d)])
    return CubePointSet(pts, Kind.HALTON)


def load_sobol_table(path=None) -> list[tuple[int, int, list[int]]]:
    """Parse a Joe-Kuo direction-number file into ``(s, a, [m_1..m_s])`` per dimension.

    The returned list starts at dimension 2; dimension 1 (all ``m_k = 1``) is
    implicit. The path falls back to ``$SW_SOBOL_TABLE`` and then the bundled
    ``new-joe-kuo-6.1111`` table.
    """
    path = path or os.environ.get("SW_SOBOL_TABLE") or DEFAULT_SOBOL_TABLE
    return _load_table(str(path))


@lru_cache(maxsize=4)
def _load_table(path: str):
    rows = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read Sobol table {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        fields = line.split()
        if not fields or not fields[0].isdigit():
            continue
        s, a = int(fields[1]), int(fields[2])
        m = [int(v) for v in fields[3 : 3 + s]]
        if len(m) != s:
            raise ConfigError(f"{path}:{lineno}: expected {s} initial numbers")
        for k, mk in enumerate(m, 1):
            if mk % 2 == 0 or mk >= 2**k:
                raise ConfigError(f"{path}:{lineno}: m_{k}={mk} must be odd and < 2^{k}")
        rows.append((s, a, m))
    return rows


def sobol_direction_integers(d: int, table=None) -> np.ndarray:
    """``V[j, k-1] = m_{k,j} * 2^(32-k)`` for k = 1..32, one row per dimension."""
    table = load_sobol_table() if table is None else table
    if d - 1 > len(table):
        raise TableExhausted(f"Sobol table holds {len(table) + 1} dimensions, {d} requested")
    V = np.zeros((d, SOBOL_BITS), dtype=np.uint64)
    V[0] = [1 << (SOBOL_BITS - k) for k in range(1, SOBOL_BITS + 1)]
    for j in range(1, d):
        s, a, m = table[j - 1]
        v = [0] * (SOBOL_BITS + 1)
        for k in range(1, min(s, SOBOL_BITS) + 1):
            v[k] = m[k - 1] << (SOBOL_BITS - k)
        for k in range(s + 1, SOBOL_BITS + 1):
            val = v[k - s] ^ (v[k - s] >> s)
            for t in range(1, s):
                if (a >> (s - 1 - t)) & 1:
                    val ^= v[k - t]
            v[k] = val
        V[j] = v[1:]
    return V


def sobol(
    m: int,
    d: int,
    include_zero: bool = False,
    order: str = "natural",
    table=None,
) -> CubePointSet:
    """First ``m`` Sobol points in ``[0,1)^d``.

    Point ``i`` XORs the direction integers selected by the binary digits of
    ``i`` (``order="natural"``) or of its Gray code ``i ^ (i >> 1)``
    (``order="gray"``, the Antonov-Saleev ordering). Both orders give the same
    point set on every prefix of length ``2^k``. Index 0 is skipped unless
    ``include_zero``.
    """
    if m < 1 or d < 1:
        raise SizeError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    if order not in ("natural", "gray"):
        raise ConfigError(f"unknown Sobol order {order!r}")
    start = 0 if include_zero else 1
    idx = np.arange(start, start + m, dtype=np.uint64)
    if idx[-1] >= 2**SOBOL_BITS:
        raise SizeError(f"Sobol index exceeds 2^{SOBOL_BITS}")
    if order == "gray":
        idx = idx ^ (idx >> np.uint64(1))
    V = sobol_direction_integers(d, table)
    acc = np.zeros((m, d), dtype=np.uint64)
    for k in range(SOBOL_BITS):
        bit = ((idx >> np.uint64(k)) & np.uint64(1)).astype(bool)
        if not bit.any():
            continue
        acc[bit] ^= V[:, k]
    return CubePointSet(acc.astype(np.float64) / 2.0**SOBOL_BITS, Kind.SOBOL)


def inverse_normal_cdf(u) -> np.ndarray:
    """Standard normal quantile with inputs clamped to ``[1e-12, 1-1e-12]``."""
    u = np.clip(np.asarray(u, dtype=np.float64), NORMAL_CLAMP, 1.0 - NORMAL_CLAMP)
    return ndtri(u)


def cube_dim_for(mapping: Mapping, d: int) -> int:
    """Cube dimension a mapping consumes to produce directions in ``R^d``."""
    if mapping is Mapping.EQUAL_AREA:
        if d != 3:
            raise MappingError("the equal-area mapping targets S^2 only (d=3)")
        return 2
    if mapping is Mapping.SPHERICAL_COORDS:
        return d - 1
    if mapping is Mapping.NORMALIZE:
        return d
    raise MappingError(f"{mapping.value!r} is not a cube-to-sphere mapping")


def equal_area(z: np.ndarray) -> np.ndarray:
    """Lambert cylindrical map ``(z1, z2) -> Phi(2 pi z1, 1 - 2 z2)`` onto S^2."""
    eta = 2.0 * np.pi * z[:, 0]
    beta = 1.0 - 2.0 * z[:, 1]
    rho = np.sqrt(np.clip(1.0 - beta * beta, 0.0, None))
    return np.column_stack([rho * np.cos(eta), rho * np.sin(eta), beta])


def spherical_coords(z: np.ndarray) -> np.ndarray:
    """Hyperspherical angles scaled linearly from the cube.

    The first ``d-2`` angles are ``pi * z_k`` and the last is ``2 pi z``. The
    map is not measure preserving, so estimates built on it are biased; it is
    kept for comparison only.
    """
    m, k = z.shape
    d = k + 1
    ang = np.pi * z.copy()
    ang[:, -1] *= 2.0
    out = np.empty((m, d))
    sin_prod = np.ones(m)
    for i in range(k):
        out[:, i] = sin_prod * np.cos(ang[:, i])
        sin_prod = sin_prod * np.sin(ang[:, i])
    out[:, d - 1] = sin_prod
    return out


def map_to_sphere(cube: CubePointSet, mapping) -> DirectionSet:
    """Send cube points to unit directions.

    ``normalize`` applies the normal quantile coordinatewise and divides by the
    norm; a point whose image is the zero vector (all coordinates 1/2) is
    replaced by ``e_1`` and counted in ``DirectionSet.degenerate``.
    """
    mapping = Mapping(mapping)
    z = cube.points
    degenerate = 0
    if mapping is Mapping.EQUAL_AREA:
        if cube.dim != 2:
            raise MappingError(f"equal-area mapping needs 2-d cube points, got {cube.dim}")
        dirs = equal_area(z)
    elif mapping is Mapping.SPHERICAL_COORDS:
        if cube.dim < 1:
            raise MappingError("spherical coordinates need at least one angle")
        dirs = spherical_coords(z)
    elif mapping is Mapping.NORMALIZE:
        if cube.dim < 2:
            raise MappingError(f"normalize mapping needs d >= 2 cube coordinates, got {cube.dim}")
        g = inverse_normal_cdf(z)
        norms = np.linalg.norm(g, axis=1)
        zero = norms == 0.0
        degenerate = int(zero.sum())
        g[zero] = 0.0
        g[zero, 0] = 1.0
        norms[zero] = 1.0
        dirs = g / norms[:, None]
    else:
        raise MappingError("mapping 'none' does not apply to cube points")
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    rand = Randomization.SHIFT if cube.scrambled else Randomization.NONE
    return DirectionSet(dirs, SamplerSpec(cube.generator, mapping, rand), degenerate=degenerate)


def randomize_shift(cube: CubePointSet, rng: np.random.Generator) -> CubePointSet:
    """Cranley-Patterson rotation: add one uniform vector to every point, modulo 1."""
    shift = rng.random(cube.dim)
    return CubePointSet(shift_points(cube.points, shift), cube.generator, scrambled=True)


def shift_points(points: np.ndarray, shift) -> np.ndarray:
    out = np.mod(points + np.asarray(shift, dtype=np.float64), 1.0)
    out[out >= 1.0] = 0.0
    return out


def randomize_rotation(dirs: DirectionSet, rng: np.random.Generator) -> DirectionSet:
    """Apply one Haar-distributed orthogonal matrix to every direction.

    The law of an i.i.d. set is rotation invariant, so its sampler spec is left as is.
    """
    q = haar_orthogonal(dirs.dim, rng)
    rotated = dirs.directions @ q.T
    rotated /= np.linalg.norm(rotated, axis=1, keepdims=True)
    spec = dirs.spec
    if spec.kind not in (Kind.UNIFORM, Kind.ORTHONORMAL):
        spec = SamplerSpec(spec.kind, spec.mapping, Randomization.ROTATION, spec.hyperparams)
    return DirectionSet(rotated, spec, dirs.seed, dirs.degenerate)
