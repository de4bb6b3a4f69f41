"""Benchmark data, reference values, convergence sweeps and distance matrices.

Experiment config files
-----------------------
A config is a plain text file of ``key = value`` lines. Blank lines and
anything after ``#`` are ignored. List values are comma separated; integer
ranges may be written ``a..b`` (inclusive). Recognized keys::

    dims        = 3, 10                  # sphere dimensions d
    m_schedule  = 100, 300, 1000         # strictly increasing
    strategies  = uniform, orthonormal, halton:normalize:shift, shcv;degree=2
    seeds       = 0..19
    reference   = big_uniform:10000000   # or analytic_two_dirac, fibonacci_lattice:100000
    data        = gaussian               # or two_dirac
    n_points    = 1000                   # atoms per cloud for gaussian data
    data_seed   = 0
    relative    = false
    threads     = 1
    out         = results/               # CSV directory
    direction_cache = cache/             # optional binary direction-set cache

Strategies are sampler strings (``kind[:mapping[:randomization]][;k=v...]``)
or ``shcv`` with an optional ``;degree=n``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .control_variates import default_degree, shcv_estimate
from .errors import ConfigError, DataError, DiagramError, DimensionError, InvalidDimension, MappingError
from .io import load_directions, save_directions
from .ot1d import EstimateResult, f_values, pairwise_sum, sw2_estimate
from .samplers import fibonacci_sphere, sample
from .sphere import DirectionSet, PointCloud, SamplerSpec, derive_seed, gaussian_directions, make_rng

log = logging.getLogger(__name__)

TWO_DIRAC_VALUE = 2.0 * (np.pi - np.sqrt(2.0)) / (3.0 * np.pi)
# reference draws use seeds at or above 2^63; sweep seeds must stay below
RESERVED_SEED = 2**63 + 0x5F3759DF
_REF_CHUNK = 1 << 18
_DATA_SALT = 0xDA7A
_DIR_SALT = 0xD1C5


class SweepWarning(UserWarning):
    pass


# ---------------------------------------------------------------- data


def gen_gaussian_pair(d: int, N: int = 1000, rng: np.random.Generator | None = None) -> tuple[PointCloud, PointCloud]:
    """Two Gaussian clouds with random means ``~ N(1, I)`` and covariances ``S S^T``,
    where ``S`` has i.i.d. standard normal entries."""
    if d < 2:
        raise InvalidDimension(f"d must be >= 2, got {d}")
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    rng = make_rng(None) if rng is None else rng
    clouds = []
    for _ in range(2):
        mean = 1.0 + rng.standard_normal(d)
        S = rng.standard_normal((d, d))
        clouds.append(PointCloud(mean + rng.standard_normal((N, d)) @ S.T))
    return clouds[0], clouds[1]


def two_dirac_case() -> tuple[PointCloud, PointCloud, float]:
    """Two-atom measures in R^3 with a closed-form SW2^2.

    ``mu`` puts mass 1/2 on ``(1,0,0)`` and ``(0,-1,0)``; ``nu`` on ``(0,0,1)``
    and ``(0,0,-1)``.
    """
    mu = PointCloud(np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0]]))
    nu = PointCloud(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]))
    return mu, nu, TWO_DIRAC_VALUE


def _same_atoms(a: PointCloud, b: PointCloud) -> bool:
    return a.points.shape == b.points.shape and np.array_equal(
        np.sort(a.points.view([("", a.points.dtype)] * a.dim), axis=0),
        np.sort(b.points.view([("", b.points.dtype)] * b.dim), axis=0),
    )


# ---------------------------------------------------------------- references


@dataclass(frozen=True)
class Reference:
    """Ground-truth protocol.

    * ``analytic_two_dirac``: the closed form, only valid on the two-Dirac case.
    * ``big_uniform``: uniform Monte Carlo with ``m_ref`` directions drawn from
      a reserved seed that sweeps never use.
    * ``fibonacci_lattice``: the Fibonacci lattice with ``m_ref`` points (d=3 only),
      whose error decays much faster than Monte Carlo.
    """

    kind: str = "big_uniform"
    m_ref: int = 10**7
    stream: int = 0

    def __post_init__(self):
        if self.kind not in ("analytic_two_dirac", "big_uniform", "fibonacci_lattice"):
            raise ConfigError(f"unknown reference protocol {self.kind!r}")
        if self.kind != "analytic_two_dirac" and self.m_ref < 2:
            raise ConfigError("reference needs m_ref >= 2")

    @classmethod
    def parse(cls, text: str) -> "Reference":
        kind, _, arg = text.strip().partition(":")
        if kind == "analytic_two_dirac":
            return cls(kind, 0)
        try:
            return cls(kind, int(float(arg))) if arg else cls(kind)
        except ValueError:
            raise ConfigError(f"bad reference {text!r}") from None

    @property
    def seed(self) -> int:
        return derive_seed(RESERVED_SEED, self.stream) | (1 << 63)

    def label(self) -> str:
        if self.kind == "analytic_two_dirac":
            return self.kind
        return f"{self.kind}:{self.m_ref}" + (f"#{self.stream}" if self.stream else "")


def _cache_key(mu: PointCloud, nu: PointCloud, ref: Reference) -> str:
    h = hashlib.sha256()
    h.update(mu.points.tobytes())
    h.update(b"|")
    h.update(nu.points.tobytes())
    h.update(ref.label().encode())
    return h.hexdigest()[:32]


def reference_estimate(
    mu: PointCloud, nu: PointCloud, protocol: Reference | str, cache_dir=None, threads: int = 1
) -> EstimateResult:
    """Reference value with its Monte Carlo standard error (0 for the exact branches)."""
    ref = Reference.parse(protocol) if isinstance(protocol, str) else protocol
    if ref.kind == "analytic_two_dirac":
        dmu, dnu, value = two_dirac_case()
        if not (_same_atoms(mu, dmu) and _same_atoms(nu, dnu)) and not (_same_atoms(mu, dnu) and _same_atoms(nu, dmu)):
            raise ConfigError("analytic_two_dirac reference requested for other data")
        return EstimateResult(value, 0.0, 0, 0.0)

    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"ref-{_cache_key(mu, nu, ref)}.json"
        if path.exists():
            return EstimateResult(**json.loads(path.read_text()))

    t0 = time.perf_counter()
    if ref.kind == "fibonacci_lattice":
        if mu.dim != 3:
            raise InvalidDimension("the Fibonacci reference needs d = 3")
        vals = f_values(mu, nu, fibonacci_sphere(ref.m_ref), threads=threads)
        res = EstimateResult(pairwise_sum(vals) / vals.size, 0.0, ref.m_ref, 0.0)
    else:
        rng = make_rng(ref.seed)
        sums, chunks = [], []
        for lo in range(0, ref.m_ref, _REF_CHUNK):
            k = min(_REF_CHUNK, ref.m_ref - lo)
            vals = f_values(mu, nu, gaussian_directions(k, mu.dim, rng), threads=threads)
            sums.append(pairwise_sum(vals))
            chunks.append(vals)
        mean = pairwise_sum(sums) / ref.m_ref
        var = pairwise_sum([pairwise_sum((v - mean) ** 2) for v in chunks]) / ref.m_ref
        res = EstimateResult(mean, float(np.sqrt(var / ref.m_ref)), ref.m_ref, 0.0)
    res = EstimateResult(res.value, res.std_error, res.m_used, time.perf_counter() - t0)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(res.to_json()))
    return res


def reference_value(mu: PointCloud, nu: PointCloud, protocol: Reference | str, cache_dir=None, threads: int = 1) -> float:
    """Ground truth for sweeps; see :class:`Reference`."""
    return reference_estimate(mu, nu, protocol, cache_dir, threads).value


# ---------------------------------------------------------------- diagrams


def _diagram(d) -> np.ndarray:
    arr = d.points if isinstance(d, PointCloud) else np.asarray(d, dtype=np.float64)
    if arr.size == 0:
        return np.empty((0, 2))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DiagramError(f"a persistence diagram is an (N, 2) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DiagramError("diagram has non-finite points")
    if np.any(arr[:, 1] < arr[:, 0]):
        raise DiagramError("diagram points must satisfy death >= birth")
    return arr


def diagonal_projection(d: np.ndarray) -> np.ndarray:
    mid = (d[:, 0] + d[:, 1]) / 2.0
    return np.column_stack([mid, mid])


def augment_diagrams(d1, d2) -> tuple[PointCloud, PointCloud]:
    """Balance two persistence diagrams by adding each one's diagonal projections to the other.

    ``mu = d1 + proj(d2)`` and ``nu = d2 + proj(d1)``, both of size ``N1 + N2``.
    One diagram may be empty; both may not.
    """
    a, b = _diagram(d1), _diagram(d2)
    if a.shape[0] + b.shape[0] == 0:
        raise DiagramError("both diagrams are empty")
    mu = np.vstack([a, diagonal_projection(b)])
    nu = np.vstack([b, diagonal_projection(a)])
    return PointCloud(mu), PointCloud(nu)


def distance_matrix(clouds, dirs: DirectionSet, diagrams: bool = False, threads: int = 1) -> np.ndarray:
    """SW2^2 estimates between all pairs, reusing one direction set.

    Each unordered pair is computed once, so the matrix is exactly symmetric.
    With ``diagrams=True`` every pair is balanced by :func:`augment_diagrams`.
    """
    n = len(clouds)
    if not diagrams:
        dims = {c.dim for c in clouds}
        if len(dims) > 1:
            raise DimensionError(f"clouds live in different dimensions: {sorted(dims)}")
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if diagrams:
                mu, nu = augment_diagrams(clouds[i], clouds[j])
            else:
                mu, nu = clouds[i], clouds[j]
            out[i, j] = out[j, i] = sw2_estimate(mu, nu, dirs, threads=threads).value
    return out


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class ConvergenceRecord:
    strategy: str
    d: int
    m: int
    error: float
    seconds: float
    seed: int
    amortized: bool = False


def _parse_list(text: str, conv=str) -> list:
    out = []
    for item in (s.strip() for s in text.split(",")):
        if not item:
            continue
        if conv is int and ".." in item:
            lo, hi = item.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(conv(item))
    return out


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass
class ExperimentConfig:
    dims: list = field(default_factory=lambda: [3])
    m_schedule: list = field(default_factory=lambda: [100, 300, 1000, 3000, 10000])
    strategies: list = field(default_factory=lambda: ["uniform"])
    seeds: list = field(default_factory=lambda: list(range(20)))
    reference: Reference = field(default_factory=Reference)
    data: str = "gaussian"
    n_points: int = 1000
    data_seed: int = 0
    relative: bool = False
    threads: int = 1
    out: str | None = None
    direction_cache: str | None = None

    def __post_init__(self):
        if isinstance(self.reference, str):
            self.reference = Reference.parse(self.reference)
        if not self.m_schedule or any(b <= a for a, b in zip(self.m_schedule, self.m_schedule[1:])):
            raise ConfigError("m_schedule must be non-empty and strictly increasing")
        if any(m < 1 for m in self.m_schedule):
            raise ConfigError("m_schedule entries must be positive")
        if self.data not in ("gaussian", "two_dirac"):
            raise ConfigError(f"unknown data {self.data!r}")
        if any(not 0 <= s < 2**63 for s in self.seeds):
            raise ConfigError("sweep seeds must lie in [0, 2^63)")
        for s in self.strategies:
            parse_strategy(s)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in ("dims", "m_schedule", "seeds"):
                kw[key] = _parse_list(value, int)
            elif key == "strategies":
                kw[key] = _parse_list(value)
            elif key in ("n_points", "data_seed", "threads"):
                kw[key] = int(value)
            elif key == "relative":
                kw[key] = _parse_bool(value)
            elif key in ("reference", "data", "out", "direction_cache"):
                kw[key] = value
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            return cls(**kw)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_text(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None


def parse_strategy(text: str):
    """``"shcv[;degree=n]"`` -> ``("shcv", n or None)``; anything else -> SamplerSpec."""
    head = text.strip().split(";")[0]
    if head == "shcv":
        spec = SamplerSpec.parse("uniform" + text.strip()[4:])
        extra = set(spec.hyperparams) - {"degree"}
        if extra:
            raise ConfigError(f"unknown shcv parameters {sorted(extra)}")
        return ("shcv", spec.hyperparams.get("degree"))
    return SamplerSpec.parse(text)


def make_data(config: ExperimentConfig, d: int) -> tuple[PointCloud, PointCloud]:
    if config.data == "two_dirac":
        if d != 3:
            raise InvalidDimension("the two-Dirac case lives in R^3")
        mu, nu, _ = two_dirac_case()
        return mu, nu
    return gen_gaussian_pair(d, config.n_points, make_rng(derive_seed(_DATA_SALT, config.data_seed, d)))


def direction_seed(seed: int, d: int, m: int) -> int:
    # top bit cleared: reference seeds have it set, so the streams never meet
    return derive_seed(_DIR_SALT, seed, d, m) & ((1 << 63) - 1)


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


def run_cell(strategy, mu, nu, m, seed, threads=1, cache_dir=None):
    """One (strategy, M, seed) cell: returns (estimate, seconds, amortized).

    Timing covers point generation plus estimation. When a cached direction
    set is loaded, generation is skipped and the run is flagged amortized.
    """
    d = mu.dim
    dseed = direction_seed(seed, d, m)
    if isinstance(strategy, tuple):
        _, degree = strategy
        n = default_degree(m, d) if degree is None else degree
        t0 = time.perf_counter()
        est = shcv_estimate(mu, nu, m, n=n, rng=make_rng(dseed), threads=threads)
        return est.value, time.perf_counter() - t0, False
    spec = strategy
    spec.check_dim(d)
    cached = None
    if cache_dir is not None:
        cached = Path(cache_dir) / f"{_safe(spec.label)}_d{d}_m{m}_s{seed}.swd"
    t0 = time.perf_counter()
    amortized = False
    if cached is not None and cached.exists():
        dirs = load_directions(cached)
        if dirs.spec != spec or dirs.m != m or dirs.dim != d:
            raise DataError(f"{cached} does not hold {spec.label} with M={m}, d={d}")
        amortized = True
        t0 = time.perf_counter()
    else:
        dirs = sample(spec, m, d, seed=dseed)
    est = sw2_estimate(mu, nu, dirs, threads=threads)
    seconds = time.perf_counter() - t0
    if cached is not None and not amortized:
        cached.parent.mkdir(parents=True, exist_ok=True)
        save_directions(cached, dirs)
    return est.value, seconds, amortized


def convergence_sweep(config: ExperimentConfig, cache_dir=None) -> list[ConvergenceRecord]:
    """Run every (strategy, d, M, seed) cell and return the error records.

    Incompatible strategy/dimension pairs are skipped with a SweepWarning.
    If ``config.out`` is set, one CSV per (strategy, d, seed) is written with
    columns ``N_sample,Error,Timers`` plus a ``manifest.json``.
    """
    records: list[ConvergenceRecord] = []
    skipped = []
    references = {}
    strategies = [(s, parse_strategy(s)) for s in config.strategies]
    for d in config.dims:
        try:
            mu, nu = make_data(config, d)
        except InvalidDimension as exc:
            skipped.append({"d": d, "reason": str(exc)})
            warnings.warn(f"d={d} skipped: {exc}", SweepWarning, stacklevel=2)
            continue
        ref = reference_estimate(mu, nu, config.reference, cache_dir=cache_dir, threads=config.threads)
        references[d] = ref.to_json()
        for label, strat in strategies:
            if not isinstance(strat, tuple):
                try:
                    strat.check_dim(d)
                except (InvalidDimension, MappingError) as exc:
                    skipped.append({"strategy": label, "d": d, "reason": str(exc)})
                    warnings.warn(f"{label} skipped for d={d}: {exc}", SweepWarning, stacklevel=2)
                    continue
            for seed in config.seeds:
                for m in config.m_schedule:
                    value, secs, amort = run_cell(strat, mu, nu, m, seed, config.threads, config.direction_cache)
                    err = abs(value - ref.value)
                    if config.relative:
                        err = err / abs(ref.value) if ref.value != 0 else float("inf")
                    records.append(ConvergenceRecord(label, d, m, err, secs, seed, amort))
    if config.out:
        write_sweep(config, records, references, skipped)
    return records


def write_sweep(config: ExperimentConfig, records, references=None, skipped=None) -> list[Path]:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    groups: dict = {}
    for r in records:
        groups.setdefault((r.strategy, r.d, r.seed), []).append(r)
    files = []
    for (strategy, d, seed), rows in groups.items():
        path = out / f"errors_{_safe(strategy)}_d{d}_seed{seed}.csv"
        write_sweep_csv(path, rows)
        files.append(path)
    manifest = {
        "dims": config.dims,
        "m_schedule": config.m_schedule,
        "strategies": config.strategies,
        "seeds": config.seeds,
        "reference": config.reference.label(),
        "references": {str(k): v for k, v in (references or {}).items()},
        "error": "relative" if config.relative else "absolute",
        "data": config.data,
        "n_points": config.n_points,
        "data_seed": config.data_seed,
        "amortized": sorted({f"{r.strategy}_d{r.d}_seed{r.seed}" for r in records if r.amortized}),
        "skipped": skipped or [],
        "files": [p.name for p in files],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return files


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N_sample", "Error", "Timers"])
        for r in rows:
            w.writerow([r.m, repr(float(r.error)), repr(float(r.seconds))])


def read_sweep_csv(path) -> list[tuple[int, float, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["N_sample", "Error", "Timers"]:
            raise DataError(f"{path}: unexpected header {header}")
        return [(int(a), float(b), float(c)) for a, b, c in reader]


def median_errors(records, strategy: str, d: int) -> dict:
    """``{M: median error over seeds}`` for one strategy and dimension."""
    by_m: dict = {}
    for r in records:
        if r.strategy == strategy and r.d == d:
            by_m.setdefault(r.m, []).append(r.error)
    return {m: float(np.median(v)) for m, v in sorted(by_m.items())}


def mean_errors(records, strategy: str, d: int) -> dict:
    by_m: dict = {}
    for r in records:
        if r.strategy == strategy and r.d == d:
            by_m.setdefault(r.m, []).append(r.error)
    return {m: float(np.mean(v)) for m, v in sorted(by_m.items())}


__all__ = [
    "ConvergenceRecord",
    "ExperimentConfig",
    "Reference",
    "SweepWarning",
    "TWO_DIRAC_VALUE",
    "augment_diagrams",
    "convergence_sweep",
    "distance_matrix",
    "gen_gaussian_pair",
    "read_sweep_csv",
    "reference_estimate",
    "reference_value",
    "two_dirac_case",
]
