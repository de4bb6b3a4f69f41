"""Error bars, discrepancies and convergence-rate fits."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import betainc, gammaln

from .errors import ConfigError, InvalidDimension, SizeError
from .ot1d import EstimateResult, pairwise_sum
from .samplers.lds import CubePointSet, inverse_normal_cdf
from .sphere import DirectionSet, gaussian_directions

CONSTANTS_FILE = Path(__file__).resolve().parent / "data" / "stolarsky_constants.txt"
CAP_CHUNK = 1024


class DiscrepancyValue(float):
    """A float that remembers whether it is exact or a one-sided bound.

    ``bound`` is ``"exact"``, ``"upper"`` or ``"lower"``.
    """

    bound: str

    def __new__(cls, value, bound: str = "exact"):
        obj = super().__new__(cls, value)
        obj.bound = bound
        return obj

    @property
    def exact(self) -> bool:
        return self.bound == "exact"

    def __repr__(self):
        return f"DiscrepancyValue({float(self)!r}, bound={self.bound!r})"


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    half_width: float
    level: float

    @property
    def low(self) -> float:
        return self.center - self.half_width

    @property
    def high(self) -> float:
        return self.center + self.half_width

    def __contains__(self, x) -> bool:
        return self.low <= x <= self.high


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    n_used: int = 0
    excluded: list = field(default_factory=list)


# ---------------------------------------------------------------- variance


def sigma_hat(values) -> float:
    """Plug-in standard deviation ``sqrt((1/M) sum f^2 - X_M^2)``, computed two-pass."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 2:
        raise SizeError(f"need at least two values, got {v.size}")
    mean = pairwise_sum(v) / v.size
    dev = v - mean
    return float(np.sqrt(max(pairwise_sum(dev * dev) / v.size, 0.0)))


def normal_quantile(p: float) -> float:
    return float(inverse_normal_cdf(p))


def confidence_interval(estimate: float, sigma: float, M: int, level: float = 0.95) -> ConfidenceInterval:
    """CLT interval ``estimate +/- sigma * q_{1-alpha/2} / sqrt(M)``."""
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must lie in (0, 1), got {level}")
    if M < 1:
        raise SizeError(f"M must be >= 1, got {M}")
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    q = normal_quantile(1.0 - (1.0 - level) / 2.0)
    return ConfidenceInterval(float(estimate), float(sigma) * q / np.sqrt(M), float(level))


def rqmc_aggregate(replicates, m_used: int | None = None) -> EstimateResult:
    """Combine ``K`` independent randomized-QMC estimates.

    The value is their mean and the standard error is the sample standard
    deviation (divisor ``K-1``) over ``sqrt(K)``.
    """
    r = np.asarray(replicates, dtype=np.float64).ravel()
    k = r.size
    if k < 2:
        raise SizeError(f"need at least two replicates, got {k}")
    mean = float(r.mean())
    sd = float(np.sqrt(np.sum((r - mean) ** 2) / (k - 1)))
    return EstimateResult(mean, sd / np.sqrt(k), k if m_used is None else m_used, 0.0)


def fit_loglog_slope(records) -> SlopeFit:
    """Least-squares line through ``(log M, log error)``.

    ``records`` holds objects with ``m`` and ``error`` attributes or plain
    ``(m, error)`` pairs. Records with a non-positive error cannot be placed on
    a log scale; they are dropped and listed in ``SlopeFit.excluded``.
    """
    ms, errs, excluded = [], [], []
    for rec in records:
        m, err = (rec.m, rec.error) if hasattr(rec, "m") else rec
        if m <= 0 or not err > 0:
            excluded.append((m, err))
            continue
        ms.append(float(m))
        errs.append(float(err))
    if len(ms) < 3:
        raise SizeError(f"need at least 3 usable records, got {len(ms)}")
    x, y = np.log(ms), np.log(errs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), len(ms), excluded)


# ---------------------------------------------------------------- star discrepancy


def _cube_points(cube) -> np.ndarray:
    pts = cube.points if isinstance(cube, CubePointSet) else np.asarray(cube, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 1:
        raise SizeError("empty point set")
    return pts


def _star_1d(x: np.ndarray) -> float:
    x = np.sort(x)
    m = x.size
    return 1.0 / (2 * m) + float(np.max(np.abs(x - (2 * np.arange(1, m + 1) - 1) / (2 * m))))


def _star_2d(pts: np.ndarray) -> float:
    """Exact value by scanning every box corner on the coordinate grid.

    The deficit ``vol - count/M`` peaks at grid corners with points counted
    strictly inside; the excess ``count/M - vol`` peaks at grid corners with
    boundary points included.
    """
    m = pts.shape[0]
    gx = np.unique(np.append(pts[:, 0], 1.0))
    gy = np.unique(np.append(pts[:, 1], 1.0))
    ix = np.searchsorted(gx, pts[:, 0])
    iy = np.searchsorted(gy, pts[:, 1])
    hist = np.zeros((gx.size, gy.size), dtype=np.int64)
    np.add.at(hist, (ix, iy), 1)
    closed = hist.cumsum(0).cumsum(1)
    # open count at corner (a, b) = closed count at (a-1, b-1)
    opened = np.zeros_like(closed)
    opened[1:, 1:] = closed[:-1, :-1]
    vol = gx[:, None] * gy[None, :]
    deficit = np.max(vol - opened / m)
    excess = np.max(closed / m - vol)
    return float(max(deficit, excess, 0.0))


def _star_grid_bound(pts: np.ndarray, grid: int) -> float:
    """Upper bound from a uniform grid with ``grid`` cells per axis.

    For a box corner ``b`` inside the grid cell ``[a, c]``, monotonicity gives
    ``vol(b) - A(b)/M <= vol(c) - A_open(a)/M`` and
    ``A(b)/M - vol(b) <= A_closed(c)/M - vol(a)``.
    """
    m, d = pts.shape
    g = grid
    lo = np.clip(np.floor(pts * g).astype(np.int64), 0, g)  # x < i/g  <=>  lo < i
    hi = np.clip(np.ceil(pts * g).astype(np.int64), 0, g)  # x <= j/g <=>  hi <= j
    shape = (g + 1,) * d

    def cumulative(idx):
        h = np.bincount(np.ravel_multi_index(idx.T, shape), minlength=(g + 1) ** d).reshape(shape)
        for ax in range(d):
            h = h.cumsum(axis=ax)
        return h

    closed_lo = cumulative(lo)  # points with lo <= i in every coord
    closed_hi = cumulative(hi)
    # open count at corner a (index i): points with lo < i, i.e. lo <= i-1
    sl_a = tuple(slice(0, g) for _ in range(d))
    sl_c = tuple(slice(1, g + 1) for _ in range(d))
    open_a = np.zeros((g,) * d, dtype=np.int64)
    inner = tuple(slice(1, g) for _ in range(d))
    open_a[inner] = closed_lo[tuple(slice(0, g - 1) for _ in range(d))]
    ticks = np.arange(g + 1) / g
    vol = np.ones(shape)
    for ax in range(d):
        sh = [1] * d
        sh[ax] = g + 1
        vol = vol * ticks.reshape(sh)
    deficit = np.max(vol[sl_c] - open_a / m)
    excess = np.max(closed_hi[sl_c] / m - vol[sl_a])
    return float(min(1.0, max(deficit, excess, 0.0)))


def star_discrepancy(cube, grid: int | None = None) -> DiscrepancyValue:
    """Star discrepancy of points in ``[0,1)^d``.

    Exact for ``d`` in {1, 2}. For ``d >= 3`` an upper bound from a uniform
    grid is returned (``bound == "upper"``); ``grid`` defaults to the largest
    resolution with about ``2^21`` cells.
    """
    pts = _cube_points(cube)
    d = pts.shape[1]
    if d == 1:
        return DiscrepancyValue(_star_1d(pts[:, 0]))
    if d == 2:
        return DiscrepancyValue(_star_2d(pts))
    if grid is None:
        grid = max(2, int((1 << 21) ** (1.0 / d)) - 1)
    return DiscrepancyValue(_star_grid_bound(pts, grid), "upper")


# ---------------------------------------------------------------- cap discrepancies


def mean_abs_coordinate(d: int) -> float:
    """``E|<U, e_1>|`` for ``U`` uniform on ``S^{d-1}``."""
    return float(np.exp(gammaln(d / 2.0) - gammaln((d + 1) / 2.0)) / np.sqrt(np.pi))


def mean_distance(d: int) -> float:
    """``E|U - V|`` for independent uniform points on ``S^{d-1}``."""
    return float(np.exp((d - 1) * np.log(2.0) + 2 * gammaln(d / 2.0) - gammaln(d - 0.5)) / np.sqrt(np.pi))


@lru_cache(maxsize=None)
def _table() -> dict:
    out = {}
    if CONSTANTS_FILE.exists():
        for line in CONSTANTS_FILE.read_text().splitlines():
            if line.strip() and not line.startswith("#"):
                d, c, a = line.split()
                out[int(d)] = (float(c), float(a))
    return out


def stolarsky_constants(d: int) -> tuple[float, float]:
    """``(C_d, A_d)`` such that the cap L2 discrepancy equals ``C_d (A_d - mean pair distance)``.

    The cap L2 discrepancy integrates the squared cap-mass error over centers
    ``c`` uniform on the sphere and heights ``t`` in ``[-1, 1]`` with Lebesgue
    measure. Integrating ``|1{<x,c> >= t} - 1{<y,c> >= t}|`` over ``t`` and ``c``
    gives ``E|c_1| |x - y|``, hence ``C_d = E|c_1| / 2``. ``A_d`` is the mean
    distance between independent uniform points.
    """
    if d < 2:
        raise InvalidDimension(f"d must be >= 2, got {d}")
    if d in _table():
        return _table()[d]
    return mean_abs_coordinate(d) / 2.0, mean_distance(d)


def write_constants_file(path=CONSTANTS_FILE, dims=range(2, 65)) -> None:
    lines = [
        "# Stolarsky constants for the sphere S^{d-1} in R^d: d C_d A_d",
        "# A_d = 2^(d-1) Gamma(d/2)^2 / (sqrt(pi) Gamma(d - 1/2)), the mean distance",
        "#       between two independent uniform points (checked against Monte Carlo).",
        "# C_d = E|<U, e_1>| / 2 = Gamma(d/2) / (2 sqrt(pi) Gamma((d+1)/2)), matching",
        "#       cap heights integrated over [-1, 1] (checked against the cap-integral",
        "#       Monte Carlo oracle in the test suite).",
        "# Regenerate with: python -c 'from swsampling.diagnostics import write_constants_file as w; w()'",
    ]
    for d in dims:
        lines.append(f"{d} {mean_abs_coordinate(d) / 2.0:.14e} {mean_distance(d):.14e}")
    Path(path).write_text("\n".join(lines) + "\n")
    _table.cache_clear()


def _dirs(dirs) -> np.ndarray:
    return dirs.directions if isinstance(dirs, DirectionSet) else np.asarray(dirs, dtype=np.float64)


def mean_pairwise_distance(points) -> float:
    """``(1/M^2) sum_{i,j} |u_i - u_j|`` over unit vectors, diagonal included (zero)."""
    U = _dirs(points)
    m = U.shape[0]
    step = max(1, (1 << 21) // m)
    partial = []
    for lo in range(0, m, step):
        g = U[lo : lo + step] @ U.T
        partial.append(pairwise_sum(np.sqrt(np.clip(2.0 - 2.0 * g, 0.0, None))))
    return pairwise_sum(partial) / (m * m)


def cap_l2_discrepancy(dirs) -> float:
    """Squared spherical-cap L2 discrepancy via Stolarsky's invariance principle."""
    U = _dirs(dirs)
    c, a = stolarsky_constants(U.shape[1])
    value = c * (a - mean_pairwise_distance(U))
    return max(value, 0.0)


def cap_measure(t, d: int):
    """Normalized surface measure of the cap ``{x : <x, c> >= t}`` on ``S^{d-1}``."""
    t = np.clip(np.asarray(t, dtype=np.float64), -1.0, 1.0)
    half = 0.5 * betainc((d - 1) / 2.0, 0.5, 1.0 - t * t)
    return np.where(t >= 0, half, 1.0 - half)


def _random_caps(n: int, d: int, rng: np.random.Generator):
    """Cap centers and heights in fixed chunks, so a shorter run sees a prefix of a longer one."""
    chunks = -(-n // CAP_CHUNK)
    centers, heights = [], []
    for _ in range(chunks):
        centers.append(gaussian_directions(CAP_CHUNK, d, rng))
        heights.append(rng.uniform(-1.0, 1.0, CAP_CHUNK))
    return np.concatenate(centers)[:n], np.concatenate(heights)[:n]


def cap_errors(dirs, centers: np.ndarray, heights: np.ndarray) -> np.ndarray:
    """Empirical minus uniform mass of each cap."""
    U = _dirs(dirs)
    out = np.empty(len(heights))
    step = max(1, (1 << 22) // U.shape[0])
    for lo in range(0, len(heights), step):
        c, t = centers[lo : lo + step], heights[lo : lo + step]
        frac = np.mean(U @ c.T >= t, axis=0)
        out[lo : lo + step] = frac - cap_measure(t, U.shape[1])
    return out


def cap_max_discrepancy_approx(dirs, n_caps: int, rng: np.random.Generator) -> DiscrepancyValue:
    """Largest cap-mass error over ``n_caps`` random caps; a lower bound on the
    cap max-discrepancy (``bound == "lower"``)."""
    if n_caps < 1:
        raise SizeError(f"n_caps must be >= 1, got {n_caps}")
    U = _dirs(dirs)
    centers, heights = _random_caps(n_caps, U.shape[1], rng)
    err = np.abs(cap_errors(U, centers, heights))
    return DiscrepancyValue(min(float(err.max()), 1.0), "lower")


def cap_l2_discrepancy_mc(dirs, n_caps: int, rng: np.random.Generator) -> tuple[float, float]:
    """Direct Monte Carlo of the cap L2 double integral: (estimate, standard error).

    Heights are uniform on ``[-1, 1]``, so the integral is twice the mean squared
    cap error.
    """
    U = _dirs(dirs)
    centers, heights = _random_caps(n_caps, U.shape[1], rng)
    sq = cap_errors(U, centers, heights) ** 2
    return 2.0 * float(sq.mean()), 2.0 * float(sq.std(ddof=1)) / np.sqrt(n_caps)
