import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import real_degree2_harmonics
from swsampling.control_variates import (
    basis_size,
    build_basis,
    count_harmonics,
    default_degree,
    shcv_estimate,
    shcv_fit,
)
from swsampling.diagnostics import fit_loglog_slope
from swsampling.errors import BasisTooLarge, SizeError
from swsampling.harness import TWO_DIRAC_VALUE, two_dirac_case
from swsampling.ot1d import f_values, sw2_estimate
from swsampling.samplers import sample_uniform
from swsampling.sphere import DirectionSet, SamplerSpec, derive_seed, gaussian_directions, make_rng


def test_harmonic_counts():
    assert all(count_harmonics(d, 0) == 1 for d in range(2, 12))
    assert count_harmonics(3, 2) == 5
    assert count_harmonics(5, 2) == 14
    assert count_harmonics(2, 7) == 2
    assert basis_size(1, 3) == 5
    # on S^2 the degree-l space has 2l+1 functions
    assert basis_size(10, 3) == sum(4 * l + 1 for l in range(1, 11))


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 12), st.integers(0, 12))
def test_count_matches_polynomial_dimension(d, n):
    # harmonic polynomials of degree n = P_n minus |x|^2 P_{n-2}
    dim = math.comb(n + d - 1, d - 1) - (math.comb(n + d - 3, d - 1) if n >= 2 else 0)
    assert count_harmonics(d, n) == dim


def test_default_degree_schedule():
    assert default_degree(100, 3) == 1
    assert default_degree(10_000, 3) == 5
    assert default_degree(10**6, 10) == 1


def test_basis_sizes_and_cap():
    assert build_basis(3, 1).basis_size == 5
    assert build_basis(5, 1).basis_size == 14
    assert build_basis(2, 4).basis_size == 8
    with pytest.raises(BasisTooLarge):
        build_basis(10, 4)


def test_degree2_basis_spans_real_harmonics():
    basis = build_basis(3, 1)
    X = gaussian_directions(50, 3, make_rng(1))
    ours = basis.evaluate(X)
    ref = real_degree2_harmonics(X)
    A, *_ = np.linalg.lstsq(ref, ours, rcond=None)
    np.testing.assert_allclose(ref @ A, ours, atol=1e-10)
    pole = np.array([[0.0, 0.0, 1.0]])
    np.testing.assert_allclose(real_degree2_harmonics(pole), [[0, 0, math.sqrt(5), 0, 0]], atol=1e-15)
    np.testing.assert_allclose(basis.evaluate(pole), real_degree2_harmonics(pole) @ A, atol=1e-10)


@pytest.mark.parametrize("d,n", [(3, 2), (4, 2), (6, 1)])
def test_basis_functions_are_harmonic(d, n):
    basis = build_basis(d, n)
    x = make_rng(2).normal(size=(6, d)) * 0.7
    h = 1e-3
    lap = -2 * d * basis.evaluate(x)
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        lap = lap + basis.evaluate(x + e) + basis.evaluate(x - e)
    lap /= h * h
    scale = np.abs(basis.evaluate(x)).max()
    assert np.abs(lap).max() < 1e-4 * scale


@pytest.mark.parametrize("d,n", [(2, 3), (3, 3), (5, 1)])
def test_basis_functions_have_zero_mean(d, n):
    basis = build_basis(d, n)
    vals = basis.evaluate(gaussian_directions(10**6, d, make_rng(3)))
    se = vals.std(axis=0) / math.sqrt(vals.shape[0])
    assert np.all(np.abs(vals.mean(axis=0)) < 4 * se)


@pytest.mark.parametrize("d,n", [(3, 5), (4, 3), (8, 1)])
def test_gram_condition(d, n):
    basis = build_basis(d, n)
    p = basis.basis_size
    Y = basis.evaluate(gaussian_directions(10 * p, d, make_rng(4)))
    assert np.linalg.cond(Y.T @ Y / (10 * p)) < 1e8


@pytest.fixture(scope="module")
def small_pair():
    from swsampling.harness import gen_gaussian_pair

    return gen_gaussian_pair(3, 50, make_rng(5))


def test_identical_measures_give_zero(small_pair):
    mu, _ = small_pair
    res = shcv_estimate(mu, mu, 200, n=2, rng=make_rng(6))
    assert res.value == 0.0
    basis = build_basis(3, 2)
    fit = shcv_fit(np.zeros(200), basis.evaluate(gaussian_directions(200, 3, make_rng(6))))
    np.testing.assert_allclose(fit.beta, 0.0, atol=1e-14)


def test_empty_basis_is_plain_monte_carlo(small_pair):
    mu, nu = small_pair
    dirs = sample_uniform(500, 3, make_rng(7))
    plain = sw2_estimate(mu, nu, dirs).value
    assert shcv_estimate(mu, nu, 500, n=0, directions=dirs).value == plain


def test_requires_more_samples_than_unknowns(small_pair):
    mu, nu = small_pair
    with pytest.raises(SizeError):
        shcv_estimate(mu, nu, 6, n=1, rng=make_rng(0))


def test_residual_variance_not_above_sample_variance(small_pair):
    mu, nu = small_pair
    theta = gaussian_directions(400, 3, make_rng(8))
    F = f_values(mu, nu, theta)
    fit = shcv_fit(F, build_basis(3, 3).evaluate(theta))
    assert np.sum(fit.residuals**2) / F.size <= F.var()


def test_invariance_under_basis_mixing(small_pair):
    mu, nu = small_pair
    theta = gaussian_directions(400, 3, make_rng(9))
    F = f_values(mu, nu, theta)
    Y = build_basis(3, 2).evaluate(theta)
    A = make_rng(10).normal(size=(Y.shape[1], Y.shape[1])) + 3 * np.eye(Y.shape[1])
    assert shcv_fit(F, Y @ A).zeta == pytest.approx(shcv_fit(F, Y).zeta, rel=1e-8)


def test_rank_deficient_design_uses_ridge(small_pair):
    mu, nu = small_pair
    theta = gaussian_directions(300, 3, make_rng(11))
    F = f_values(mu, nu, theta)
    Y = build_basis(3, 1).evaluate(theta)
    fit = shcv_fit(F, np.hstack([Y, Y[:, :1]]))
    assert fit.ridge
    assert fit.zeta == pytest.approx(shcv_fit(F, Y).zeta, rel=1e-6)


def test_explicit_directions_reused(small_pair):
    mu, nu = small_pair
    dirs = sample_uniform(300, 3, make_rng(12))
    a = shcv_estimate(mu, nu, 300, n=2, directions=dirs)
    b = shcv_estimate(mu, nu, 300, n=2, directions=DirectionSet(dirs.directions.copy(), SamplerSpec.parse("uniform")))
    assert a.value == b.value and a.std_error > 0


def test_two_dirac_beats_plain_monte_carlo():
    mu, nu, _ = two_dirac_case()
    m = 10_000
    n = int(m**0.25)
    basis = build_basis(3, n)
    cv, mc = [], []
    for seed in range(20):
        dirs = sample_uniform(m, 3, make_rng(derive_seed(77, seed)))
        cv.append(abs(shcv_estimate(mu, nu, m, basis=basis, directions=dirs).value - TWO_DIRAC_VALUE))
        mc.append(abs(sw2_estimate(mu, nu, dirs).value - TWO_DIRAC_VALUE))
    assert np.median(cv) < np.median(mc)


def test_slope_steeper_than_monte_carlo(gauss3, gauss3_ref):
    mu, nu = gauss3
    ms = [100, 1000, 10_000]
    cv = {m: [] for m in ms}
    mc = {m: [] for m in ms}
    for seed in range(20):
        for m in ms:
            dirs = sample_uniform(m, 3, make_rng(derive_seed(78, seed, m)))
            cv[m].append(abs(shcv_estimate(mu, nu, m, directions=dirs).value - gauss3_ref.value))
            mc[m].append(abs(sw2_estimate(mu, nu, dirs).value - gauss3_ref.value))
    cv_slope = fit_loglog_slope([(m, np.median(cv[m])) for m in ms]).slope
    mc_slope = fit_loglog_slope([(m, np.median(mc[m])) for m in ms]).slope
    assert cv_slope <= mc_slope - 0.2
