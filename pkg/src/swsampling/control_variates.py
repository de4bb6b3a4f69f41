"""Sliced Wasserstein estimation with spherical-harmonic control variates (SHCV).

Every harmonic of degree >= 1 has zero mean on the sphere, so regressing the
sliced integrand on a set of harmonics and subtracting the fitted part leaves
the mean unchanged while removing most of the variance. The integrand is even
in ``theta``, so only even degrees are used.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import null_space, solve_triangular

from .errors import BasisTooLarge, InvalidDimension, SizeError
from .ot1d import EstimateResult, check_pair, f_values, pairwise_sum
from .sphere import DirectionSet, PointCloud, gaussian_directions, make_rng

BASIS_CAP = 5000
# fixed seed for the conditioning sample; changing it only mixes the basis
_GRAM_SEED = 0x5EED
_RANK_TOL = 1e-10


def count_harmonics(d: int, n: int) -> int:
    """Dimension of the space of degree-``n`` spherical harmonics on ``S^{d-1}``."""
    if d < 2:
        raise InvalidDimension(f"d must be >= 2, got {d}")
    if n < 0:
        raise ValueError(f"degree must be >= 0, got {n}")
    if n == 0:
        return 1
    if d == 2:
        return 2
    return (2 * n + d - 2) * math.factorial(n + d - 3) // (math.factorial(d - 2) * math.factorial(n))


def basis_size(n: int, d: int) -> int:
    """Number of even-degree harmonics with degree in ``[2, 2n]``."""
    return sum(count_harmonics(d, 2 * l) for l in range(1, n + 1))


def default_degree(m: int, d: int) -> int:
    """``max(1, floor(M^(1/(2(d-1))) / 2))``, which grows slower than ``M^(1/(2(d-1)))``."""
    return max(1, int(math.floor(m ** (1.0 / (2 * (d - 1))) / 2.0)))


def _exponents(d: int, k: int) -> np.ndarray:
    rows = []
    for combo in itertools.combinations_with_replacement(range(d), k):
        e = [0] * d
        for i in combo:
            e[i] += 1
        rows.append(e)
    return np.array(rows, dtype=np.int64).reshape(-1, d)


@lru_cache(maxsize=32)
def harmonic_coefficients(d: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Monomial exponents of degree ``k`` and a basis of the kernel of the Laplacian.

    Returns ``(E, C)`` where ``E`` is ``(n_monomials, d)`` and each column of
    ``C`` holds the monomial coefficients of one harmonic polynomial.
    """
    hi = _exponents(d, k)
    lo = _exponents(d, k - 2)
    index = {tuple(e): i for i, e in enumerate(lo)}
    lap = np.zeros((len(lo), len(hi)))
    for j, e in enumerate(hi):
        for i in range(d):
            if e[i] >= 2:
                f = e.copy()
                f[i] -= 2
                lap[index[tuple(f)], j] += e[i] * (e[i] - 1)
    return hi, null_space(lap)


def _monomials(X: np.ndarray, E: np.ndarray) -> np.ndarray:
    k = int(E.sum(axis=1).max())
    powers = X[:, :, None] ** np.arange(k + 1)
    return np.prod(powers[:, np.arange(X.shape[1])[None, :], E], axis=-1)


@dataclass(frozen=True)
class HarmonicBasis:
    """Even spherical harmonics of degree 2..2n, mixed to be orthonormal on a
    fixed uniform sample of size ``10 p``."""

    dim: int
    max_even_degree: int
    parts: tuple = ()
    transform: np.ndarray | None = None

    @property
    def basis_size(self) -> int:
        return 0 if self.transform is None else self.transform.shape[1]

    def _raw(self, X: np.ndarray) -> np.ndarray:
        if self.dim == 2:
            z = X[:, 0] + 1j * X[:, 1]
            cols = []
            for k in range(1, self.max_even_degree // 2 + 1):
                w = z ** (2 * k)
                cols += [w.real, w.imag]
            return np.sqrt(2.0) * np.column_stack(cols)
        # bound the (rows, monomials, d) gather to a few tens of MB
        widest = max(E.shape[0] for E, _ in self.parts)
        step = max(1, (1 << 22) // (widest * self.dim))
        out = np.empty((X.shape[0], sum(C.shape[1] for _, C in self.parts)))
        for lo in range(0, X.shape[0], step):
            blk = X[lo : lo + step]
            out[lo : lo + step] = np.hstack([_monomials(blk, E) @ C for E, C in self.parts])
        return out

    def evaluate(self, X) -> np.ndarray:
        """Basis values at the rows of ``X``, shape ``(M, p)``."""
        X = X.directions if isinstance(X, DirectionSet) else np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise InvalidDimension(f"expected points in R^{self.dim}, got shape {X.shape}")
        if self.basis_size == 0:
            return np.empty((X.shape[0], 0))
        return self._raw(X) @ self.transform


def empty_basis(d: int) -> HarmonicBasis:
    return HarmonicBasis(d, 0)


def build_basis(d: int, n: int, cap: int = BASIS_CAP) -> HarmonicBasis:
    """All even harmonics up to degree ``2n`` on ``S^{d-1}``.

    For ``d >= 3`` harmonic polynomials of each degree are found as the
    kernel of the Laplacian acting on monomial coefficients. The combined
    basis is then orthonormalized against a fixed uniform sample of size
    ``10 p`` to keep the regression well conditioned. For ``d = 2`` the
    basis is ``cos 2k theta, sin 2k theta``.
    """
    if d < 2:
        raise InvalidDimension(f"d must be >= 2, got {d}")
    if n < 1:
        raise ValueError(f"degree must be >= 1, got {n}")
    p = basis_size(n, d)
    if p > cap:
        raise BasisTooLarge(f"basis with d={d}, n={n} has {p} functions, cap is {cap}")
    if d == 2:
        return HarmonicBasis(2, 2 * n, (), np.eye(p))
    parts = tuple(harmonic_coefficients(d, 2 * l) for l in range(1, n + 1))
    proto = HarmonicBasis(d, 2 * n, parts, np.eye(p))
    sample = gaussian_directions(10 * p, d, make_rng(_GRAM_SEED))
    G = proto._raw(sample) / np.sqrt(10 * p)
    R = np.linalg.qr(G, mode="r")
    transform = solve_triangular(R, np.eye(p), lower=False)
    return HarmonicBasis(d, 2 * n, parts, transform)


@dataclass(frozen=True)
class CVFit:
    zeta: float
    beta: np.ndarray
    residuals: np.ndarray
    ridge: bool = False


def shcv_fit(F, Y) -> CVFit:
    """Least squares of ``F`` on ``[1, Y]``; ``zeta`` is the intercept.

    Solved through QR of the centered design. If the smallest diagonal entry
    of R is below ``1e-10`` times the largest, a ridge fit with
    ``lambda = 1e-10 trace(Yc^T Yc) / p`` is used instead.
    """
    F = np.asarray(F, dtype=np.float64).ravel()
    Y = np.asarray(Y, dtype=np.float64)
    m, p = Y.shape
    f_bar = pairwise_sum(F) / m
    if p == 0:
        return CVFit(f_bar, np.empty(0), F - f_bar)
    y_bar = Y.mean(axis=0)
    Yc = Y - y_bar
    Fc = F - f_bar
    Q, R = np.linalg.qr(Yc)
    diag = np.abs(np.diag(R))
    ridge = diag.min() < _RANK_TOL * diag.max()
    if ridge:
        gram = Yc.T @ Yc
        lam = _RANK_TOL * np.trace(gram) / p
        beta = np.linalg.solve(gram + lam * np.eye(p), Yc.T @ Fc)
    else:
        beta = solve_triangular(R, Q.T @ Fc, lower=False)
    return CVFit(float(f_bar - y_bar @ beta), beta, Fc - Yc @ beta, bool(ridge))


def shcv_estimate(
    mu: PointCloud,
    nu: PointCloud,
    M: int,
    n: int | None = None,
    rng: np.random.Generator | None = None,
    basis: HarmonicBasis | None = None,
    directions=None,
    threads: int = 1,
) -> EstimateResult:
    """SHCV estimate of SW2^2 from ``M`` uniform directions.

    ``n`` defaults to :func:`default_degree`; ``n = 0`` gives the plain Monte
    Carlo mean. Pass ``directions`` to reuse a given set of draws. The
    standard error is the residual standard deviation over ``sqrt(M)``.
    """
    check_pair(mu, nu)
    d = mu.dim
    if basis is None:
        n = default_degree(M, d) if n is None else n
        basis = empty_basis(d) if n == 0 else build_basis(d, n)
    p = basis.basis_size
    if M <= p + 1:
        raise SizeError(f"need M > p + 1 = {p + 1} directions, got {M}")
    t0 = time.perf_counter()
    if directions is None:
        if rng is None:
            raise ValueError("pass an rng or explicit directions")
        theta = gaussian_directions(M, d, rng)
    else:
        theta = directions.directions if isinstance(directions, DirectionSet) else np.asarray(directions)
        if theta.shape != (M, d):
            raise InvalidDimension(f"directions have shape {theta.shape}, expected {(M, d)}")
    F = f_values(mu, nu, theta, threads=threads)
    fit = shcv_fit(F, basis.evaluate(theta))
    dof = max(M - p - 1, 1)
    se = float(np.sqrt(np.sum(fit.residuals**2) / dof / M))
    return EstimateResult(max(fit.zeta, 0.0), se, M, time.perf_counter() - t0)

