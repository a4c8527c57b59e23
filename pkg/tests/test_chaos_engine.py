import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from stratowave.chaos_engine import (
    ConeIndicator,
    GaussianBump,
    KernelQuery,
    active_partial_sums,
    correction_terms,
    decomposition_census,
    fourier_fn,
    kernel_norm_sq,
    mean_term_n2_physical,
    parseval_check,
    simplex_integral,
    simplex_integral_mc,
    simplex_integral_quadrature,
    skorohod_second_moment,
    stratonovich_mean_series,
    stratonovich_mean_term,
)
from stratowave.noise_model import ATOM_FIXTURE, GaussianDensity, InfiniteVarianceError, Riesz, SpectralAtoms, noise_eval, sample_noise, zero_measure
from stratowave.picard_solver import GridSpec, center_values_batch, noise_on_grid


def constant_atom(w, dim=1):
    return SpectralAtoms(((0.0,) * dim,), (w,))


# --- simplex integral and the kernel transform ---------------------------


def test_fourier_fn_first_order_closed_form():
    for xi in (0.4, math.pi, 7.0):
        val = fourier_fn(KernelQuery(1, 1.3, (0.0,), ((xi,),)))
        assert val.real == pytest.approx((1 - math.cos(1.3 * xi)) / xi**2, rel=1e-12)
        assert val.imag == pytest.approx(0.0, abs=1e-15)


def test_fourier_fn_zero_frequency():
    assert fourier_fn(KernelQuery(1, 2.0, (0.0,), ((0.0,),))).real == pytest.approx(2.0)
    for n in (2, 3, 5):
        val = fourier_fn(KernelQuery(n, 1.5, (0.0,), ((0.0,),) * n))
        assert val.real == pytest.approx(1.5 ** (2 * n) / math.factorial(2 * n), rel=1e-12)


def test_fourier_fn_phase_and_damping():
    freqs = ((1.0,), (-0.3,))
    base = fourier_fn(KernelQuery(2, 1.0, (0.0,), freqs))
    shifted = fourier_fn(KernelQuery(2, 1.0, (0.7,), freqs))
    assert shifted == pytest.approx(base * np.exp(-1j * 0.7 * 0.7))
    damped = fourier_fn(KernelQuery(2, 1.0, (0.0,), freqs, eps=0.4))
    assert damped == pytest.approx(base * math.exp(-0.2 * (1.0 + 0.09)))


def test_kernel_query_validation():
    with pytest.raises(ValueError):
        KernelQuery(2, 1.0, (0.0,), ((1.0,),))
    with pytest.raises(ValueError):
        KernelQuery(1, -1.0, (0.0,), ((1.0,),))


@pytest.mark.parametrize("r", [[2.0], [1.3, 0.4], [0.0, 3.0], [1.3, 0.4, 2.2], [5.0, 5.0, 5.0]])
def test_simplex_integral_against_nested_quadrature(r):
    assert simplex_integral(r, 1.2) == pytest.approx(simplex_integral_quadrature(r, 1.2), rel=1e-8, abs=1e-12)


def test_simplex_integral_against_mc_high_order():
    r = [0.5, 1.5, 0.2, 2.5, 1.0]
    val, se = simplex_integral_mc(r, 1.0, 400_000, seed=3)
    assert abs(simplex_integral(r, 1.0) - val) <= 4 * se


def test_simplex_integral_batched():
    rs = np.array([[0.3, 1.0], [2.0, 0.5], [0.0, 0.0]])
    np.testing.assert_allclose(simplex_integral(rs, 1.0), [simplex_integral(r, 1.0) for r in rs], rtol=1e-14)
    assert simplex_integral(rs[2], 1.0) == pytest.approx(1 / 24)


# --- kernel norms --------------------------------------------------------


def test_first_kernel_norm_atoms():
    v, se = kernel_norm_sq(1, 1.0, 0.0, ATOM_FIXTURE)
    assert v == pytest.approx(4 / math.pi**4, rel=1e-12)
    assert se == 0.0


def brute_norm_sq(n, t, measure, eps=0.0):
    # sum over ordered tuples of atoms of |mean over permutations of Psi|^2
    freqs, w = measure.freqs, measure.weights_array
    total = 0.0
    for idx in itertools.product(range(len(w)), repeat=n):
        f = freqs[list(idx)]
        vals = []
        for perm in itertools.permutations(range(n)):
            radii = np.abs(np.cumsum(f[list(perm), 0]))
            vals.append(simplex_integral_quadrature(list(radii), t))
        damp = math.exp(-eps * float(np.sum(f * f)))
        total += np.prod(w[list(idx)]) * damp * np.mean(vals) ** 2
    return total


@pytest.mark.parametrize("eps", [0.0, 0.3])
def test_second_kernel_norm_against_brute_force(eps):
    m = SpectralAtoms.symmetric([(1.0,), (2.5,)], [0.3, 0.2])
    v, _ = kernel_norm_sq(2, 1.0, 0.0, m, eps)
    assert v == pytest.approx(brute_norm_sq(2, 1.0, m, eps), rel=1e-7)


def test_kernel_norm_constant_atom():
    # zero frequency: the kernel is t^{2n}/(2n)! and the norm is w^n times its square
    w = 0.7
    for n in (1, 2, 4, 7):
        v, _ = kernel_norm_sq(n, 1.0, 0.0, constant_atom(w))
        assert v == pytest.approx(w**n / math.factorial(2 * n) ** 2, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_kernel_norm_eps_monotone(n):
    for m in (ATOM_FIXTURE, SpectralAtoms.symmetric([(0.5,), (2.0,)], [0.5, 0.5])):
        v0, _ = kernel_norm_sq(n, 1.0, 0.0, m, 0.0)
        v1, _ = kernel_norm_sq(n, 1.0, 0.0, m, 1.0)
        v2, _ = kernel_norm_sq(n, 1.0, 0.0, m, 2.0)
        assert v2 <= v1 <= v0


def test_kernel_norm_x_invariance():
    for n in (1, 3):
        assert kernel_norm_sq(n, 1.0, 0.0, ATOM_FIXTURE)[0] == kernel_norm_sq(n, 1.0, 3.0, ATOM_FIXTURE)[0]
    g = GaussianDensity(1.0, 1.0, 1)
    assert kernel_norm_sq(2, 1.0, 0.0, g, n_samples=2000)[0] == kernel_norm_sq(2, 1.0, 3.0, g, n_samples=2000)[0]


def test_kernel_norm_permutation_symmetry():
    a = SpectralAtoms(((1.0,), (-1.0,), (2.0,), (-2.0,)), (0.2, 0.2, 0.3, 0.3))
    b = SpectralAtoms(((-2.0,), (2.0,), (-1.0,), (1.0,)), (0.3, 0.3, 0.2, 0.2))
    for n in (2, 3):
        assert kernel_norm_sq(n, 1.0, 0.0, a)[0] == pytest.approx(kernel_norm_sq(n, 1.0, 0.0, b)[0], rel=1e-13)


def test_first_kernel_norm_continuous_against_quadrature():
    g = GaussianDensity(1.5, 2.0, 1)
    dens = lambda k: 1.5 * math.exp(-k * k / 8) / math.sqrt(8 * math.pi)  # noqa: E731
    ref = integrate.quad(lambda k: ((1 - math.cos(k)) / k**2) ** 2 * dens(k) if k else 0.25 * dens(0), -np.inf, np.inf)[0]
    v, se = kernel_norm_sq(1, 1.0, 0.0, g, n_samples=40_000)
    assert abs(v - ref) <= 4 * se


def test_first_kernel_norm_riesz_against_quadrature():
    m, eps = Riesz(0.5, 1), 0.2
    kappa = math.gamma(0.25) / (math.sqrt(math.pi) * 2**0.5 * math.gamma(0.25))
    f = lambda r: 2 * kappa * r**-0.5 * math.exp(-eps * r * r) * ((1 - math.cos(r)) / r**2) ** 2  # noqa: E731
    ref = integrate.quad(f, 0, np.inf, limit=400)[0]
    v, se = kernel_norm_sq(1, 1.0, 0.0, m, eps, n_samples=40_000)
    assert abs(v - ref) <= 4 * se


def test_sampled_symmetrization_agrees_with_exact():
    g = GaussianDensity(1.0, 1.5, 1)
    ve, se_e = kernel_norm_sq(3, 1.0, 0.0, g, n_samples=20_000, seed=1)
    vs, se_s = kernel_norm_sq(3, 1.0, 0.0, g, symmetrization="sampled", n_samples=20_000, seed=2)
    assert abs(ve - vs) <= 4 * math.hypot(se_e, se_s)


def test_exact_symmetrization_limit():
    with pytest.raises(ValueError):
        kernel_norm_sq(6, 1.0, 0.0, GaussianDensity(1.0, 1.0, 1))
    # atoms have no limit
    assert kernel_norm_sq(8, 1.0, 0.0, ATOM_FIXTURE)[0] > 0


def test_isometry_consistency_with_picard():
    # E[(1 + H_1)^2] = 1 + ||f_1||^2 for the first chaos
    spec = GridSpec.matched(1.0, 0.0, 40)
    n = 4000
    W = np.stack([noise_on_grid(sample_noise(ATOM_FIXTURE, 0.0, rng_seed=10_000 + s), spec) for s in range(n)])
    h = center_values_batch(W, spec, 1, chaos=True)
    vals = (h[:, 0] + h[:, 1]) ** 2
    target = 1 + kernel_norm_sq(1, 1.0, 0.0, ATOM_FIXTURE)[0]
    assert abs(vals.mean() - target) <= 3 * vals.std(ddof=1) / math.sqrt(n)


# --- Skorohod moments ----------------------------------------------------


def test_skorohod_zero_measure():
    assert skorohod_second_moment(1.0, 0.0, zero_measure(1), n_max=4).value == 1.0


def test_skorohod_atoms_stabilize():
    res = skorohod_second_moment(1.0, 0.0, ATOM_FIXTURE, 0.0, 8)
    partial = np.cumsum(res.terms)
    assert all(term > 0 for term in res.terms)
    assert np.all(np.diff(partial) >= 0)
    assert res.tail_ratio < 1e-6
    assert res.terms[0] == pytest.approx(4 / math.pi**4, rel=1e-12)


def test_skorohod_constant_atom_series():
    # E u^2 = sum_n n! w^n / ((2n)!)^2 for the zero-frequency atom
    w = 0.5
    res = skorohod_second_moment(1.0, 0.0, constant_atom(w), 0.0, 8)
    exact = 1 + sum(math.factorial(n) * w**n / math.factorial(2 * n) ** 2 for n in range(1, 9))
    assert res.value == pytest.approx(exact, rel=1e-12)


def test_skorohod_eps_monotone():
    a = skorohod_second_moment(1.0, 0.0, ATOM_FIXTURE, 0.0, 6).value
    b = skorohod_second_moment(1.0, 0.0, ATOM_FIXTURE, 0.5, 6).value
    assert b <= a


# --- Stratonovich mean ---------------------------------------------------


def test_active_partial_sums_tableau():
    etas = np.array([[[1.0], [10.0]]])
    sums = active_partial_sums(4, [(1, 3), (2, 4)], etas)[0, :, 0]
    np.testing.assert_array_equal(sums, [1.0, 11.0, 10.0, 0.0])
    nested = active_partial_sums(4, [(1, 4), (2, 3)], etas)[0, :, 0]
    np.testing.assert_array_equal(nested, [1.0, 11.0, 1.0, 0.0])


def test_active_partial_sums_last_is_zero():
    rng = np.random.default_rng(0)
    etas = rng.standard_normal((5, 3, 2))
    sums = active_partial_sums(6, [(1, 2), (3, 6), (4, 5)], etas)
    np.testing.assert_allclose(sums[:, -1, :], 0.0, atol=1e-15)


def test_active_partial_sums_rejects_bad_pairs():
    with pytest.raises(ValueError):
        active_partial_sums(4, [(3, 2)], np.zeros((1, 1)))


def test_mean_series_trivial_cases():
    assert stratonovich_mean_series(1.0, ATOM_FIXTURE, n_max=0).value == 1.0
    assert stratonovich_mean_term(3, 1.0, ATOM_FIXTURE) == (0.0, 0.0)
    with pytest.raises(ValueError):
        stratonovich_mean_series(1.0, ATOM_FIXTURE, n_max=3)


def test_mean_terms_constant_atom():
    # W = c with c ~ N(0, w): E v = sum_m E[c^{2m}] t^{4m} / (4m)!
    w, t = 0.6, 1.3
    for n in (2, 4, 6):
        m = n // 2
        exact = w**m * math.prod(range(1, n, 2)) * t ** (2 * n) / math.factorial(2 * n)
        v, _ = stratonovich_mean_term(n, t, constant_atom(w))
        assert v == pytest.approx(exact, rel=1e-10)


def test_mean_series_atom_fixture():
    res = stratonovich_mean_series(1.0, ATOM_FIXTURE, 0.0, 8)
    assert res.value == pytest.approx(1.0301814294246558, rel=1e-12)
    t = res.terms
    assert t[2] / t[1] < 1 and t[3] / t[2] < 1


def test_mean_series_matches_realization_average():
    # the atom-pair field has two Gaussian coefficients; v(1, 0) depends only on them
    spec = GridSpec.matched(1.0, 0.0, 40)
    n = 6000
    W = np.stack([noise_on_grid(sample_noise(ATOM_FIXTURE, 0.0, rng_seed=50_000 + s), spec) for s in range(n)])
    v = center_values_batch(W, spec, 10)
    series = stratonovich_mean_series(1.0, ATOM_FIXTURE, 0.0, 8).value
    assert abs(v.mean() - series) <= 3 * v.std(ddof=1) / math.sqrt(n) + 2e-4


@pytest.mark.parametrize("eps", [0.0, 0.3])
def test_n2_dual_routes_atoms(eps):
    spec, _ = stratonovich_mean_term(2, 1.0, ATOM_FIXTURE, eps)
    phys = mean_term_n2_physical(1.0, ATOM_FIXTURE, eps)
    assert spec == pytest.approx(phys, rel=1e-6)


def test_n2_dual_routes_atoms_d2():
    m = SpectralAtoms.symmetric([(1.0, 2.0), (0.0, 1.5)], [0.4, 0.3])
    spec, _ = stratonovich_mean_term(2, 1.0, m)
    phys = mean_term_n2_physical(1.0, m)
    assert spec == pytest.approx(phys, rel=1e-6)


def test_n2_dual_routes_continuous():
    g = GaussianDensity(1.0, 2.0, 1)
    spec, se = stratonovich_mean_term(2, 1.0, g, 0.0, n_samples=40_000)
    assert abs(spec - mean_term_n2_physical(1.0, g)) <= 4 * se
    r = Riesz(0.5, 1)
    spec, se = stratonovich_mean_term(2, 1.0, r, 0.1, n_samples=40_000)
    assert abs(spec - mean_term_n2_physical(1.0, r, 0.1)) <= 4 * se


def test_mean_term_positive_physical_oracle():
    # gamma = cos(pi z): int G(s, z) gamma(z) dz = sin(pi s)/pi, so the n = 2 term is
    # int_0^1 (1-s)^2/2 * sin(pi s)/pi ds > 0
    ref = integrate.quad(lambda s: 0.5 * (1 - s) ** 2 * math.sin(math.pi * s) / math.pi, 0, 1)[0]
    assert ref > 0
    assert stratonovich_mean_term(2, 1.0, ATOM_FIXTURE)[0] == pytest.approx(ref, rel=1e-10)


def test_mean_term_rejects_singular():
    with pytest.raises(InfiniteVarianceError):
        stratonovich_mean_term(2, 1.0, Riesz(0.5, 1), 0.0)


# --- census --------------------------------------------------------------


def test_census_rows():
    assert correction_terms(1) == []
    rows = decomposition_census(4)
    assert [(r.level, r.count) for r in rows] == [(4, 1), (2, 6), (0, 3)]
    assert rows[0].label == "Skorohod term J_4"
    assert rows[1].label == "correction M_4"
    assert [(r.level, r.count) for r in decomposition_census(6)] == [(6, 1), (4, 15), (2, 45), (0, 15)]
    assert len(correction_terms(4)) == 9


# --- Parseval ------------------------------------------------------------


@given(st.floats(0.2, 3.0))
def test_parseval_bump_atoms(scale):
    lhs, rhs = parseval_check(ATOM_FIXTURE, GaussianBump(scale))
    # int exp(-z^2/2s^2) cos(pi z) dz in closed form
    exact = scale * math.sqrt(2 * math.pi) * math.exp(-0.5 * (math.pi * scale) ** 2)
    assert lhs == pytest.approx(exact, rel=1e-8, abs=1e-10)
    assert rhs == pytest.approx(exact, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize(
    "m,phi",
    [
        (Riesz(0.5, 1), GaussianBump(0.8)),
        (Riesz(0.5, 1), ConeIndicator(1.2)),
        (Riesz(1.2, 2), GaussianBump(1.0)),
        (GaussianDensity(1.0, 1.5, 1), ConeIndicator(0.9)),
        (SpectralAtoms.symmetric([(1.0, 2.0)], [0.5]), GaussianBump(0.6)),
    ],
)
def test_parseval_variants(m, phi):
    lhs, rhs = parseval_check(m, phi)
    assert np.isfinite(lhs) and np.isfinite(rhs)
    assert lhs == pytest.approx(rhs, rel=1e-4)


def test_parseval_linear():
    a = parseval_check(Riesz(0.5, 1), GaussianBump(0.8))
    b = parseval_check(Riesz(0.5, 1), GaussianBump(0.8, amplitude=2.0))
    assert b[0] == pytest.approx(2 * a[0], rel=1e-10)
    assert b[1] == pytest.approx(2 * a[1], rel=1e-10)


def test_parseval_rejects_unknown_test_function():
    with pytest.raises(TypeError):
        parseval_check(ATOM_FIXTURE, object())


def test_noise_field_covariance_is_what_the_norms_assume():
    # sanity link between the sampler and the spectral weights used above
    vals = np.array([noise_eval(sample_noise(ATOM_FIXTURE, 0.0, rng_seed=s), [0.0, 1.0]) for s in range(20_000)])
    prod = vals[:, 0] * vals[:, 1]
    assert abs(prod.mean() + 1.0) <= 4 * prod.std(ddof=1) / math.sqrt(len(prod)) + 1e-12
