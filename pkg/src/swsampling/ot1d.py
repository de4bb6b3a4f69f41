"""Exact 1-D and circular optimal transport, the sliced integrand and the SW2 estimator."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, SizeError, UnbalancedError
from .sphere import DirectionSet, PointCloud, project

REDUCTION_CHUNK = 1024
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SortedProjection:
    """Projected values in non-decreasing order and the sorting permutation.

    ``values[k] == projection[perm[k]]``; ties keep the original index order.
    """

    values: np.ndarray
    perm: np.ndarray


@dataclass(frozen=True)
class EstimateResult:
    value: float
    std_error: Optional[float]
    m_used: int
    wall_time: float

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "m_used": self.m_used,
            "wall_time": self.wall_time,
        }


def sorted_projection(cloud: PointCloud, theta) -> SortedProjection:
    proj = project(cloud, theta)
    perm = np.argsort(proj, kind="stable")
    return SortedProjection(proj[perm], perm)


def w2_squared_1d(a, b) -> float:
    """Squared 2-Wasserstein distance between two uniform empirical measures on R.

    Both inputs must have the same length; the optimal coupling matches the
    k-th smallest of ``a`` with the k-th smallest of ``b``.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise SizeError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise SizeError("need at least one atom")
    diff = np.sort(a) - np.sort(b)
    return float(np.mean(diff * diff))


def check_pair(mu: PointCloud, nu: PointCloud) -> None:
    if mu.dim != nu.dim:
        raise DimensionError(f"measures live in R^{mu.dim} and R^{nu.dim}")
    if mu.n != nu.n:
        raise UnbalancedError(f"measures have {mu.n} and {nu.n} atoms; only balanced pairs are supported")


def f_eval(mu: PointCloud, nu: PointCloud, theta) -> float:
    """``W2^2`` between the projections of ``mu`` and ``nu`` on ``theta``."""
    check_pair(mu, nu)
    return w2_squared_1d(project(mu, theta), project(nu, theta))


def _f_block(x: np.ndarray, y: np.ndarray, block: np.ndarray) -> np.ndarray:
    px = np.sort(block @ x.T, axis=1)
    py = np.sort(block @ y.T, axis=1)
    px -= py
    px *= px
    return px.mean(axis=1)


def f_values(mu: PointCloud, nu: PointCloud, directions, threads: int = 1) -> np.ndarray:
    """Integrand at every row of ``directions`` (an (M, d) array or a DirectionSet).

    Work is split into fixed blocks so the output does not depend on ``threads``.
    """
    check_pair(mu, nu)
    dirs = directions.directions if isinstance(directions, DirectionSet) else np.asarray(directions, dtype=np.float64)
    if dirs.ndim != 2 or dirs.shape[1] != mu.dim:
        raise DimensionError(f"directions have shape {dirs.shape}, measures live in R^{mu.dim}")
    m = dirs.shape[0]
    # keep each block's projection matrix around 32 MB
    step = max(1, min(4096, (1 << 22) // mu.n))
    starts = range(0, m, step)
    out = np.empty(m)
    x, y = mu.points, nu.points

    def run(start):
        out[start : start + step] = _f_block(x, y, dirs[start : start + step])

    if threads > 1 and m > step:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return out


def pairwise_sum(values) -> float:
    """Sum in fixed 1024-element chunks, then combine chunk sums as a binary tree.

    The result depends only on the input order, never on how work was scheduled.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        return 0.0
    sums = [float(np.sum(v[i : i + REDUCTION_CHUNK])) for i in range(0, v.size, REDUCTION_CHUNK)]
    while len(sums) > 1:
        nxt = [sums[i] + sums[i + 1] for i in range(0, len(sums) - 1, 2)]
        if len(sums) % 2:
            nxt.append(sums[-1])
        sums = nxt
    return sums[0]


def sw2_estimate(mu: PointCloud, nu: PointCloud, dirs: DirectionSet, threads: int = 1) -> EstimateResult:
    """Average of the sliced integrand over the directions of ``dirs``.

    ``std_error`` is reported only for i.i.d. uniform directions, where the
    plug-in ``sigma_hat / sqrt(M)`` is a valid error bar.
    """
    from .diagnostics import sigma_hat

    if dirs.m < 1:
        raise SizeError("empty direction set")
    t0 = time.perf_counter()
    vals = f_values(mu, nu, dirs, threads=threads)
    value = max(pairwise_sum(vals) / dirs.m, 0.0)
    se = None
    if dirs.spec.has_variance_theory and dirs.m >= 2:
        se = sigma_hat(vals) / np.sqrt(dirs.m)
    return EstimateResult(value, se, dirs.m, time.perf_counter() - t0)


def circle_coordinates(angles) -> np.ndarray:
    """Angles in radians -> positions on the unit-circumference circle [0, 1)."""
    x = np.mod(np.asarray(angles, dtype=np.float64) / TWO_PI, 1.0)
    # mod can round up to exactly 1.0 for tiny negative inputs
    x[x >= 1.0] = 0.0
    return x


def _unit_circle_w2(xs: np.ndarray) -> np.ndarray:
    """Circle W2^2 to uniform for sorted rows ``xs`` in [0,1), unit circumference.

    Against the uniform law the lifted quantile of the target under a rotation
    offset ``a`` is ``t + a``, so the cost ``int_0^1 (q(t) - t - a)^2 dt`` is a
    single quadratic in ``a`` minimized at ``a* = mean(x) - 1/2``. The cell
    integrals of ``(x_i - t)^2`` are taken in closed form.
    """
    n = xs.shape[-1]
    lo = np.arange(n) / n
    hi = (np.arange(n) + 1) / n
    cells = ((xs - lo) ** 3 - (xs - hi) ** 3) / 3.0
    shift = xs.mean(axis=-1) - 0.5
    return np.maximum(cells.sum(axis=-1) - shift * shift, 0.0)


def w2_squared_circle_to_uniform(angles) -> float:
    """Squared 2-Wasserstein distance, geodesic cost in radians, from the
    empirical measure on ``angles`` to the uniform law on the circle.

    Angles are reduced modulo ``2*pi`` first.
    """
    x = np.sort(circle_coordinates(np.atleast_1d(angles)))
    if x.size == 0:
        raise SizeError("need at least one angle")
    return float(_unit_circle_w2(x)) * TWO_PI**2
