"""Core types: point clouds, direction sets, sampler specs and seeded randomness.

Randomness
----------
Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's ``Philox`` bit generator (Philox-4x64-10, Salmon et al. 2011, a
counter-based generator with published round constants). For a given seed the
raw stream is identical on every platform. Parallel work never shares a
generator; it derives children with :func:`spawn_rng`, which feeds
``(seed, stream_index)`` through numpy's ``SeedSequence``.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from .errors import ConfigError, DataError, DimensionError, InvalidDimension, MappingError, SizeError

UNIT_NORM_TOL = 1e-12
_TINY_NORM = 1e-100


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    """Return a Philox-backed generator; ``seed=None`` draws fresh OS entropy."""
    if seed is not None and not 0 <= int(seed) < 2**64:
        raise ConfigError(f"seed must fit in 64 bits, got {seed}")
    return np.random.Generator(np.random.Philox(seed))


def spawn_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent child generator for stream ``stream`` of ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(*parts: int) -> int:
    """Deterministic 64-bit seed from a tuple of integers."""
    ss = np.random.SeedSequence(entropy=[int(p) for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class Kind(str, Enum):
    UNIFORM = "uniform"
    ORTHONORMAL = "orthonormal"
    HALTON = "halton"
    SOBOL = "sobol"
    FIBONACCI = "fibonacci"
    RIESZ = "riesz"
    SSW = "ssw"


class Mapping(str, Enum):
    NONE = "none"
    EQUAL_AREA = "equal_area"
    SPHERICAL_COORDS = "spherical_coords"
    NORMALIZE = "normalize"


class Randomization(str, Enum):
    NONE = "none"
    SHIFT = "shift"
    ROTATION = "rotation"


CUBE_KINDS = frozenset({Kind.HALTON, Kind.SOBOL})
SPHERE_KINDS = frozenset({Kind.UNIFORM, Kind.ORTHONORMAL, Kind.FIBONACCI, Kind.RIESZ, Kind.SSW})
_IID_KINDS = frozenset({Kind.UNIFORM, Kind.ORTHONORMAL})


@dataclass(frozen=True)
class SamplerSpec:
    """Declarative description of a sampling strategy.

    ``hyperparams`` carries strategy-specific knobs, e.g. ``s``, ``T``,
    ``step`` and ``backtrack`` for Riesz; ``L``, ``T`` and ``lr`` for SSW;
    ``start_index``, ``include_zero`` or ``order`` for the cube sequences;
    ``literal`` for Fibonacci.
    """

    kind: Kind
    mapping: Mapping = Mapping.NONE
    randomization: Randomization = Randomization.NONE
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "mapping", Mapping(self.mapping))
        object.__setattr__(self, "randomization", Randomization(self.randomization))
        object.__setattr__(self, "hyperparams", dict(self.hyperparams))
        if self.kind in CUBE_KINDS and self.mapping is Mapping.NONE:
            raise ConfigError(f"{self.kind.value} lives on the cube and needs a sphere mapping")
        if self.kind in SPHERE_KINDS and self.mapping is not Mapping.NONE:
            raise ConfigError(f"{self.kind.value} is defined on the sphere; mapping must be 'none'")
        if self.kind in _IID_KINDS and self.randomization is not Randomization.NONE:
            raise ConfigError(f"{self.kind.value} is already random; randomization must be 'none'")
        if self.kind in SPHERE_KINDS and self.randomization is Randomization.SHIFT:
            raise ConfigError("a cube shift only applies to halton/sobol; use 'rotation'")

    def check_dim(self, d: int) -> None:
        if d < 2:
            raise InvalidDimension(f"sphere dimension d must be >= 2, got {d}")
        if self.kind is Kind.FIBONACCI and d != 3:
            raise InvalidDimension("the Fibonacci lattice is only defined on S^2 (d=3)")
        if self.mapping is Mapping.EQUAL_AREA and d != 3:
            raise MappingError("the equal-area mapping targets S^2 only (d=3)")
        if self.kind is Kind.SSW and d < 3:
            raise InvalidDimension("SSW sampling needs d >= 3")

    @property
    def has_variance_theory(self) -> bool:
        # orthonormal blocks are unbiased but have no usable variance estimate
        return self.kind is Kind.UNIFORM

    @property
    def label(self) -> str:
        out = self.kind.value
        if self.mapping is not Mapping.NONE or self.randomization is not Randomization.NONE:
            out += f":{self.mapping.value}"
        if self.randomization is not Randomization.NONE:
            out += f":{self.randomization.value}"
        for key in sorted(self.hyperparams):
            out += f";{key}={self.hyperparams[key]}"
        return out

    @classmethod
    def parse(cls, text: str) -> "SamplerSpec":
        """Parse ``kind[:mapping[:randomization]][;key=value...]``.

        >>> SamplerSpec.parse("halton:equal_area:shift").randomization.value
        'shift'
        """
        head, *params = [p.strip() for p in text.strip().split(";")]
        parts = head.split(":")
        if len(parts) > 3:
            raise ConfigError(f"malformed strategy {text!r}")
        try:
            kind = Kind(parts[0])
            mapping = Mapping(parts[1]) if len(parts) > 1 else Mapping.NONE
            rand = Randomization(parts[2]) if len(parts) > 2 else Randomization.NONE
        except ValueError as exc:
            raise ConfigError(f"malformed strategy {text!r}: {exc}") from None
        return cls(kind, mapping, rand, parse_params(params))

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "mapping": self.mapping.value,
            "randomization": self.randomization.value,
            "hyperparams": self.hyperparams,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SamplerSpec":
        return cls(obj["kind"], obj["mapping"], obj["randomization"], obj.get("hyperparams", {}))


def parse_params(items) -> dict:
    """``["T=10", "s=0.1"]`` -> ``{"T": 10, "s": 0.1}``; values go through literal_eval."""
    out: dict[str, Any] = {}
    for item in items:
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        try:
            out[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key] = value
    return out


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointCloud:
    """Uniform-weight discrete measure: ``N`` points in ``R^d``, one per row."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise DataError(f"point cloud must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise DataError("point cloud needs at least one point")
        if pts.shape[1] < 2:
            raise InvalidDimension(f"point cloud dimension must be >= 2, got {pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise DataError("point cloud has non-finite coordinates")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def second_moment(self) -> float:
        """Mean squared norm of the atoms."""
        return float(np.mean(np.sum(self.points**2, axis=1)))

    def __eq__(self, other):
        return isinstance(other, PointCloud) and np.array_equal(self.points, other.points)

    __hash__ = None


@dataclass(frozen=True)
class DirectionSet:
    """``M`` unit vectors (rows of ``directions``) plus their provenance.

    ``degenerate`` counts points that a mapping could not send to a
    well-defined direction and replaced by the fallback ``e_1``.
    """

    directions: np.ndarray
    spec: SamplerSpec
    seed: Optional[int] = None
    degenerate: int = 0

    def __post_init__(self):
        dirs = np.asarray(self.directions, dtype=np.float64)
        if dirs.ndim != 2:
            raise DataError(f"direction set must be an (M, d) array, got {dirs.shape}")
        if dirs.shape[0] < 1:
            raise SizeError("direction set is empty")
        norms = np.linalg.norm(dirs, axis=1)
        bad = np.abs(norms - 1.0) > UNIT_NORM_TOL
        if np.any(bad) or not np.all(np.isfinite(dirs)):
            raise DataError(f"{int(bad.sum())} directions are not unit vectors")
        object.__setattr__(self, "directions", _readonly(dirs))

    @property
    def m(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self):
        return self.m

    def __eq__(self, other):
        return (
            isinstance(other, DirectionSet)
            and self.spec == other.spec
            and self.seed == other.seed
            and np.array_equal(self.directions, other.directions)
        )

    __hash__ = None


def normalize_rows(x: np.ndarray) -> np.ndarray:
    """Divide each row by its norm. Rows must be non-zero."""
    x = np.asarray(x, dtype=np.float64)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def as_direction(v, tol: float = UNIT_NORM_TOL) -> np.ndarray:
    """Validate a single unit vector and return it as a float array."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise DataError("a direction is a 1-d vector with at least two entries")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise DataError(f"direction norm {np.linalg.norm(v)!r} is not 1")
    return v


def inner(points: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-wise inner products ``<x_k, v>``; ``v`` may be any vector or a (d, M) block."""
    points = np.asarray(points, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if points.shape[-1] != v.shape[0]:
        raise DimensionError(f"dimension mismatch: points in R^{points.shape[-1]}, vector in R^{v.shape[0]}")
    return points @ v


def project(cloud: PointCloud, theta) -> np.ndarray:
    """Project every atom of ``cloud`` on the line spanned by ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim != 1 or theta.shape[0] != cloud.dim:
        raise DimensionError(f"cloud lives in R^{cloud.dim}, direction has shape {theta.shape}")
    return inner(cloud.points, theta)


def gaussian_direction(d: int, rng: np.random.Generator) -> np.ndarray:
    """One uniform direction on ``S^{d-1}`` as a normalized Gaussian vector."""
    if d < 2:
        raise InvalidDimension(f"d must be >= 2, got {d}")
    while True:
        z = rng.standard_normal(d)
        norm = np.linalg.norm(z)
        if norm >= _TINY_NORM:
            return z / norm


def gaussian_directions(m: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` uniform directions as an (m, d) array; zero-norm draws are redrawn."""
    if d < 2:
        raise InvalidDimension(f"d must be >= 2, got {d}")
    z = rng.standard_normal((m, d))
    norms = np.linalg.norm(z, axis=1)
    for i in np.flatnonzero(norms < _TINY_NORM):
        z[i] = gaussian_direction(d, rng)
        norms[i] = 1.0
    return z / norms[:, None]
