"""Deterministic and optimized point sets on the sphere.

* Fibonacci spiral lattice on S^2.
* Riesz ``s``-energy minimizers by projected gradient descent.
* Points from sliced-spherical (SSW) descent towards the uniform law.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidDimension, SingularConfiguration, SizeError
from ..ot1d import TWO_PI, _unit_circle_w2, circle_coordinates
from ..sphere import DirectionSet, Kind, SamplerSpec, gaussian_directions

GOLDEN_RATIO = (1.0 + np.sqrt(5.0)) / 2.0
COINCIDENT_TOL = 1e-9
# pairs closer than this have their distance recomputed from differences,
# because 2 - 2<u,v> loses all precision for nearly equal unit vectors
_EXACT_R2 = 1e-12
_MAX_HALVINGS = 20


@dataclass
class OptimizerTrace:
    """Objective values recorded by an optimizer, one per iteration performed.

    What each entry measures is documented by the optimizer that fills it.
    ``initial`` is the objective of the starting configuration.
    """

    objective_per_iter: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    initial: float = float("nan")


def _check(m: int, d: int | None = None) -> None:
    if m < 1:
        raise SizeError(f"need at least one point, got M={m}")
    if d is not None and d < 2:
        raise InvalidDimension(f"d must be >= 2, got {d}")


# ---------------------------------------------------------------- Fibonacci


def fibonacci_sphere(m: int, literal: bool = False) -> DirectionSet:
    """Spherical Fibonacci lattice with ``m`` points on S^2.

    The default is the symmetric variant with indices ``k - (m-1)/2``, heights
    ``2k/m`` and longitudes ``2 pi k / phi^2``, which covers the sphere evenly
    for every ``m``. ``literal=True`` uses indices ``0..m-1`` with heights
    ``2k/(2m+1)``; those stay in the upper hemisphere and are kept only for
    reproducing that convention.
    """
    _check(m)
    if literal:
        k = np.arange(m, dtype=np.float64)
        z = 2.0 * k / (2 * m + 1)
    else:
        k = np.arange(m, dtype=np.float64) - (m - 1) / 2.0
        z = 2.0 * k / m
    polar = np.arccos(np.clip(z, -1.0, 1.0))
    chi = TWO_PI * k / GOLDEN_RATIO**2
    sp = np.sin(polar)
    pts = np.column_stack([sp * np.cos(chi), sp * np.sin(chi), np.cos(polar)])
    spec = SamplerSpec(Kind.FIBONACCI, hyperparams={"literal": True} if literal else {})
    return DirectionSet(pts, spec)


def roots_of_unity(m: int, offset: float = 0.0) -> np.ndarray:
    """``m`` equally spaced points on the unit circle, rotated by ``offset`` radians."""
    _check(m)
    ang = offset + TWO_PI * np.arange(m) / m
    return np.column_stack([np.cos(ang), np.sin(ang)])


# ---------------------------------------------------------------- Riesz


def _points(points) -> np.ndarray:
    if isinstance(points, DirectionSet):
        return points.directions
    return np.asarray(points, dtype=np.float64)


def _block_rows(m: int) -> int:
    return max(1, min(m, (1 << 21) // max(m, 1)))


def _pair_r2(U: np.ndarray, sq: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Squared distances from rows ``lo:hi`` to all rows; self-pairs set to inf."""
    r2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (U[lo:hi] @ U.T)
    np.maximum(r2, 0.0, out=r2)
    close = np.argwhere(r2 < _EXACT_R2)
    if close.size:
        i, j = close[:, 0], close[:, 1]
        diff = U[lo + i] - U[j]
        r2[i, j] = np.einsum("ij,ij->i", diff, diff)
    r2[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
    return r2


def _riesz_pass(U: np.ndarray, s: float, with_grad: bool):
    """Energy (ordered pairs) and optionally its Euclidean gradient."""
    m, d = U.shape
    sq = np.einsum("ij,ij->i", U, U)
    step = _block_rows(m)
    energy = 0.0
    grad = np.zeros_like(U) if with_grad else None
    coef = -2.0 * (abs(s) if s != 0 else 1.0)
    for lo in range(0, m, step):
        hi = min(m, lo + step)
        r2 = _pair_r2(U, sq, lo, hi)
        if r2.min() <= COINCIDENT_TOL**2:
            raise SingularConfiguration("two points coincide; the Riesz energy is infinite")
        finite = np.isfinite(r2)
        if s > 0:
            energy += float(np.sum(r2[finite] ** (-s / 2.0)))
        elif s == 0:
            energy -= 0.5 * float(np.sum(np.log(r2[finite])))
        else:
            energy -= float(np.sum(r2[finite] ** (-s / 2.0)))
        if with_grad:
            w = np.where(finite, r2, 1.0) ** (-s / 2.0 - 1.0)
            w[~finite] = 0.0
            grad[lo:hi] = coef * (U[lo:hi] * w.sum(axis=1)[:, None] - w @ U)
    return energy, grad


def riesz_energy(points, s: float) -> float:
    """Riesz ``s``-energy summed over ordered pairs ``i != j``.

    ``s > 0`` sums ``|u_i - u_j|^{-s}``, ``s = 0`` sums ``-log |u_i - u_j|``, and
    ``s < 0`` sums ``-|u_i - u_j|^{|s|}`` so that minimizing it spreads the
    points in every case. Coincident points raise SingularConfiguration.
    """
    U = _points(points)
    if U.ndim != 2 or U.shape[0] < 2:
        raise SizeError("the energy needs at least two points")
    return _riesz_pass(U, float(s), False)[0]


def riesz_gradient(points, s: float) -> np.ndarray:
    """Euclidean gradient of :func:`riesz_energy` with respect to every point."""
    U = _points(points)
    return _riesz_pass(U, float(s), True)[1]


def _tangent(U: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g - np.einsum("ij,ij->i", g, U)[:, None] * U


def _retract(U: np.ndarray) -> np.ndarray:
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def riesz_minimize(
    m: int,
    d: int,
    s: float = 0.1,
    T: int = 10,
    step: float = 1.0,
    rng: np.random.Generator | None = None,
    backtrack: bool = False,
    init=None,
    tol: float = 1e-12,
) -> tuple[DirectionSet, OptimizerTrace]:
    """Projected gradient descent on the Riesz ``s``-energy, started from uniform points.

    Each iteration moves every point against the tangential gradient of the
    per-point energy ``E_s / M`` and renormalizes. Scaling by ``1/M`` keeps a
    unit step meaningful at every ``M``; the unscaled gradient grows like ``M``
    and a fixed step then scatters the points.

    ``objective_per_iter[t]`` is the energy after iteration ``t + 1``. With
    ``backtrack`` the step is halved (up to 20 times) until the energy
    does not increase, which makes the trace non-increasing. ``converged`` is
    set once the relative energy change drops below ``tol``.
    """
    _check(m, d)
    if m < 2:
        raise SizeError("Riesz optimization needs at least two points")
    if init is None:
        if rng is None:
            raise ValueError("pass an rng or an initial configuration")
        U = gaussian_directions(m, d, rng)
    else:
        U = _retract(_points(init).copy())
    energy, grad = _riesz_pass(U, s, True)
    trace = OptimizerTrace(initial=energy)
    for _ in range(T):
        direction = _tangent(U, grad) / m
        h = step
        cand = _retract(U - h * direction)
        if backtrack:
            cand_energy = _riesz_pass(cand, s, False)[0]
            halvings = 0
            while cand_energy > energy and halvings < _MAX_HALVINGS:
                h *= 0.5
                halvings += 1
                cand = _retract(U - h * direction)
                cand_energy = _riesz_pass(cand, s, False)[0]
            if cand_energy > energy:
                cand = U
        prev = energy
        U = cand
        energy, grad = _riesz_pass(U, s, True)
        trace.objective_per_iter.append(energy)
        trace.iterations += 1
        if abs(prev - energy) <= tol * abs(energy):
            trace.converged = True
            break
    hp = {"s": s, "T": T, "step": step}
    if backtrack:
        hp["backtrack"] = True
    return DirectionSet(U, SamplerSpec(Kind.RIESZ, hyperparams=hp)), trace


# ---------------------------------------------------------------- SSW


def random_great_circles(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` uniformly random great circles as orthonormal pairs, shape ``(n, d, 2)``."""
    if d < 3:
        raise InvalidDimension("great-circle slicing needs d >= 3")
    q, _ = np.linalg.qr(rng.standard_normal((n, d, 2)))
    return q


def circle_angles(points, circles: np.ndarray) -> np.ndarray:
    """Angle in ``[0, 2 pi)`` of the projection of every point onto every circle.

    The closest point of the great circle spanned by ``(e, f)`` to ``x`` is the
    normalized ``<x,e> e + <x,f> f``, whose angle is ``atan2(<x,f>, <x,e>)``.
    Returns shape ``(n_circles, M)``.
    """
    U = _points(points)
    P = _circle_proj(U, circles)
    return np.mod(np.arctan2(P[..., 1], P[..., 0]), TWO_PI)


def _circle_proj(U: np.ndarray, circles: np.ndarray) -> np.ndarray:
    n, d, _ = circles.shape
    flat = circles.transpose(1, 0, 2).reshape(d, 2 * n)
    return (U @ flat).reshape(U.shape[0], n, 2).transpose(1, 0, 2)


def ssw_objective(points, circles: np.ndarray) -> float:
    """Mean over ``circles`` of the circle ``W2^2`` (radians) between the
    projected points and the uniform law."""
    U = _points(points)
    x = np.sort(circle_coordinates(circle_angles(U, circles)), axis=1)
    return float(_unit_circle_w2(x).mean()) * TWO_PI**2


def _ssw_value_grad(U: np.ndarray, circles: np.ndarray):
    """Sliced objective on a unit-circumference circle and its gradient in ``U``."""
    m = U.shape[0]
    P = _circle_proj(U, circles)
    x = circle_coordinates(np.arctan2(P[..., 1], P[..., 0]))
    order = np.argsort(x, axis=1, kind="stable")
    xs = np.take_along_axis(x, order, axis=1)
    value = float(_unit_circle_w2(xs).mean())
    a = 1.0 / m
    rank = np.arange(m)
    g_sorted = 2 * a * (xs - xs.mean(axis=1, keepdims=True)) + a * (1 - a - 2 * a * rank)
    gx = np.empty_like(g_sorted)
    np.put_along_axis(gx, order, g_sorted, axis=1)
    r2 = np.maximum(np.einsum("lmk,lmk->lm", P, P), 1e-300)
    scale = gx / (r2 * TWO_PI)
    c0 = -P[..., 1] * scale
    c1 = P[..., 0] * scale
    G = c0.T @ circles[:, :, 0] + c1.T @ circles[:, :, 1]
    return value, G / circles.shape[0]


def ssw_step(U: np.ndarray, circles: np.ndarray, lr: float) -> np.ndarray:
    """One descent step on fixed circles, followed by renormalization."""
    _, G = _ssw_value_grad(U, circles)
    return _retract(U - lr * G)


def ssw_minimize(
    m: int,
    d: int,
    L: int = 500,
    T: int = 250,
    lr: float = 150.0,
    rng: np.random.Generator | None = None,
    init=None,
    window: int = 10,
    tol: float = 1e-3,
) -> tuple[DirectionSet, OptimizerTrace]:
    """Move ``m`` points towards the uniform law by stochastic descent on the
    sliced circle distance, drawing ``L`` fresh great circles per iteration.

    The step applies ``lr`` to the gradient of the objective measured on the
    unit-circumference circle; the trace reports the same objective in
    radians; entry ``t`` is measured on iteration ``t``'s circles just before
    its step. The trace is noisy by construction, so ``converged`` compares the
    means of the last two windows of ``window`` iterations against ``tol``.
    """
    _check(m, d)
    if rng is None:
        raise ValueError("SSW descent needs an rng")
    if d < 3:
        raise InvalidDimension("SSW sampling needs d >= 3")
    U = gaussian_directions(m, d, rng) if init is None else _retract(_points(init).copy())
    trace = OptimizerTrace()
    for t in range(T):
        circles = random_great_circles(L, d, rng)
        value, G = _ssw_value_grad(U, circles)
        if t == 0:
            trace.initial = value * TWO_PI**2
        U = _retract(U - lr * G)
        trace.objective_per_iter.append(value * TWO_PI**2)
        trace.iterations += 1
    tr = trace.objective_per_iter
    if len(tr) >= 2 * window:
        recent = np.mean(tr[-window:])
        before = np.mean(tr[-2 * window : -window])
        trace.converged = bool(abs(before - recent) <= tol * max(before, 1e-300))
    hp = {"L": L, "T": T, "lr": lr}
    return DirectionSet(U, SamplerSpec(Kind.SSW, hyperparams=hp)), trace
