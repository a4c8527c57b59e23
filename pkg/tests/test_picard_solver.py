import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from stratowave.noise_model import ATOM_FIXTURE, NoiseSample, constant_noise, sample_noise, zero_measure
from stratowave.picard_solver import (
    FieldGrid,
    GridSpec,
    NumericalError,
    center_values_batch,
    chaos_increment,
    grid_error_estimate,
    moment_estimate,
    noise_on_grid,
    picard_run,
    realization_values,
)


def cosine_mode(k, a, dim=1):
    freq = np.zeros((1, dim))
    freq[0, 0] = k
    return NoiseSample(0.0, freq, np.ones(1), np.array([a]), np.zeros(1))


def h1_cosine(k, a, t, x):
    # int_0^t sin(k(t-s))/k ds * a cos(kx)
    return a * math.cos(k * x) * (1 - math.cos(k * t)) / k**2


def h2_cosine(k, a, t, x):
    # H_1 W = a^2/(2k^2) (1 - cos ks)(1 + cos 2ky); G(t-s) maps cos 2ky to sin(2k(t-s))/(2k) cos 2kx
    f = lambda s: (1 - math.cos(k * s)) * ((t - s) + math.cos(2 * k * x) * math.sin(2 * k * (t - s)) / (2 * k))  # noqa: E731
    return a * a / (2 * k * k) * integrate.quad(f, 0, t, epsabs=1e-14)[0]


# --- grid ----------------------------------------------------------------


def test_grid_extent_is_the_backward_cone():
    spec = GridSpec.matched(1.5, 0.3, 10)
    ax = spec.axis(0)
    assert ax[0] == pytest.approx(0.3 - 1.5) and ax[-1] == pytest.approx(0.3 + 1.5)
    assert spec.dx == pytest.approx(spec.dt)
    assert spec.is_matched
    assert spec.refined().dt == pytest.approx(spec.dt / 2)
    assert spec.refined().is_matched


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(1.0, 0.0, 10, 21, dim=3)
    with pytest.raises(ValueError):
        GridSpec(-1.0, 0.0, 10, 21)
    with pytest.raises(ValueError):
        GridSpec(1.0, (0.0, 0.0), 10, 21, dim=1)


def test_rows_export():
    spec = GridSpec(1.0, 0.0, 2, 3)
    grid = FieldGrid(np.arange(9.0).reshape(3, 3), spec)
    rows = list(grid.rows())
    assert rows[0] == (0.0, -1.0, 0.0)
    assert rows[-1] == (1.0, 1.0, 8.0)


# --- deterministic oracles -----------------------------------------------


@pytest.mark.parametrize("scheme", ["cone", "diamond"])
def test_zero_noise_keeps_one(scheme):
    spec = GridSpec.matched(1.0, 0.0, 16)
    its = picard_run(sample_noise(zero_measure(1), 0.0), spec, 4, scheme)
    assert len(its) == 5
    for g in its:
        assert np.all(g.values == 1.0)
    for n in range(1, 5):
        assert np.all(chaos_increment(its, n).values == 0.0)


@pytest.mark.parametrize("scheme", ["cone", "diamond"])
@pytest.mark.parametrize("c", [0.7, -1.3])
def test_one_step_constant_noise(scheme, c):
    spec = GridSpec.matched(1.0, 0.0, 20)
    v1 = picard_run(constant_noise(c), spec, 1, scheme)[1]
    # 1 + c t^2 / 2 along the centre line; both schemes integrate it exactly
    np.testing.assert_allclose(v1.values[:, spec.n_x // 2], 1 + c * spec.times**2 / 2, atol=1e-12)


def test_one_step_constant_noise_d2():
    spec = GridSpec(1.0, (0.0, 0.0), 16, 17, dim=2)
    v1 = picard_run(constant_noise(0.7, 2), spec, 1)[1]
    assert v1.at_center() == pytest.approx(1.35, rel=1e-3)


@pytest.mark.parametrize("scheme", ["cone", "diamond"])
@pytest.mark.parametrize("c", [0.8, -0.8])
def test_constant_noise_full_solution(scheme, c):
    # v'' = c v, v(0) = 1, v'(0) = 0
    exact = math.cosh(math.sqrt(c)) if c > 0 else math.cos(math.sqrt(-c))
    spec = GridSpec.matched(1.0, 0.0, 40)
    v = picard_run(constant_noise(c), spec, 14, scheme)[-1].at_center()
    assert v == pytest.approx(exact, abs=2e-4)


def test_constant_noise_full_solution_d2():
    exact = math.cosh(math.sqrt(0.8))
    errs = [abs(picard_run(constant_noise(0.8, 2), GridSpec(1.0, (0.0, 0.0), n, n + 1, dim=2), 12)[-1].at_center() - exact) for n in (6, 12)]
    assert errs[1] < errs[0]
    assert errs[1] < 5e-4


@pytest.mark.parametrize("scheme", ["cone", "diamond"])
def test_first_increment_single_mode(scheme):
    k, a, t = 2.3, 0.9, 1.2
    spec = GridSpec.matched(t, 0.4, 80)
    its = picard_run(cosine_mode(k, a), spec, 2, scheme)
    h1 = chaos_increment(its, 1).at_center()
    h2 = chaos_increment(its, 2).at_center()
    assert h1 == pytest.approx(h1_cosine(k, a, t, 0.4), abs=2e-4)
    assert h2 == pytest.approx(h2_cosine(k, a, t, 0.4), abs=2e-4)


def test_first_increment_single_mode_d2():
    k, a, t = 2.0, 1.0, 1.0
    spec = GridSpec(t, (0.3, -0.2), 16, 17, dim=2)
    h1 = chaos_increment(picard_run(cosine_mode(k, a, 2), spec, 1), 1).at_center()
    assert h1 == pytest.approx(h1_cosine(k, a, t, 0.3), abs=2e-3)


def test_chaos_increment_zero_is_one():
    spec = GridSpec.matched(1.0, 0.0, 8)
    its = picard_run(cosine_mode(1.0, 1.0), spec, 2)
    assert np.all(chaos_increment(its, 0).values == 1.0)
    with pytest.raises(IndexError):
        chaos_increment(its, 3)


@given(st.integers(0, 10_000))
@settings(max_examples=10)
def test_initial_slice_is_one(seed):
    spec = GridSpec.matched(1.0, 0.0, 10)
    for g in picard_run(sample_noise(ATOM_FIXTURE, 0.0, rng_seed=seed), spec, 3):
        assert np.all(g.values[0] == 1.0)


def test_increments_decay():
    spec = GridSpec.matched(1.0, 0.0, 30)
    noise = sample_noise(ATOM_FIXTURE, 0.0, rng_seed=3)
    its = picard_run(noise, spec, 12)
    sup = [np.max(np.abs(chaos_increment(its, n).values)) for n in range(1, 13)]
    assert all(b < a for a, b in zip(sup[2:], sup[3:]))
    assert sup[-1] < 1e-10


def test_increments_respect_factorial_bound():
    # |H_n| <= (sup |W|)^n t^{2n} / (2n)! for the deterministic recursion with |W| <= w
    spec = GridSpec.matched(1.0, 0.0, 30)
    noise = sample_noise(ATOM_FIXTURE, 0.0, rng_seed=11)
    w = np.max(np.abs(noise_on_grid(noise, spec)))
    its = picard_run(noise, spec, 8, "diamond")
    for n in range(1, 9):
        sup = np.max(np.abs(chaos_increment(its, n).values[-1]))
        assert sup <= w**n / math.factorial(2 * n) * (1 + 1e-6)


def test_schemes_agree_and_refine():
    noise = sample_noise(ATOM_FIXTURE, 0.0, rng_seed=3)
    base = GridSpec.matched(1.0, 0.0, 10)
    ref = picard_run(noise, GridSpec.matched(1.0, 0.0, 320), 12, "diamond")[-1].at_center()
    errs = []
    spec = base
    for _ in range(3):
        errs.append(abs(picard_run(noise, spec, 12, "cone")[-1].at_center() - ref))
        spec = spec.refined()
    assert errs[0] > errs[1] > errs[2]
    fine, err = grid_error_estimate(noise, GridSpec.matched(1.0, 0.0, 50), 12, "diamond")
    assert abs(fine - ref) <= 3 * err + 1e-9


def test_batch_matches_single_runs():
    spec = GridSpec.matched(1.0, 0.2, 20)
    noises = [sample_noise(ATOM_FIXTURE, 0.1, rng_seed=s) for s in range(5)]
    W = np.stack([noise_on_grid(s, spec) for s in noises])
    batch = center_values_batch(W, spec, 6)
    single = [picard_run(s, spec, 6, "diamond")[-1].at_center() for s in noises]
    np.testing.assert_allclose(batch, single, rtol=1e-13)
    chaos = center_values_batch(W, spec, 6, chaos=True)
    np.testing.assert_allclose(chaos.sum(axis=1), batch, rtol=1e-13)


def test_non_finite_raises_with_location():
    spec = GridSpec.matched(1.0, 0.0, 10)
    with pytest.raises(NumericalError) as info:
        picard_run(constant_noise(1e300), spec, 4)
    assert info.value.location is not None
    assert "picard_solver" in str(info.value)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        picard_run(constant_noise(1.0, 2), GridSpec.matched(1.0, 0.0, 4), 1)


def test_d2_rejects_diamond():
    with pytest.raises(ValueError):
        picard_run(constant_noise(1.0, 2), GridSpec(1.0, (0, 0), 4, 5, 2), 1, "diamond")


# --- moments -------------------------------------------------------------


def test_first_chaos_second_moment_atoms():
    # H_1(1, 0) = 2 a / pi^2 for W = a cos(pi x) + b sin(pi x): E H_1^2 = 4 / pi^4
    spec = GridSpec.matched(1.0, 0.0, 40)
    n = 4000
    W = np.stack([noise_on_grid(sample_noise(ATOM_FIXTURE, 0.0, rng_seed=s), spec) for s in range(n)])
    h1 = center_values_batch(W, spec, 1, chaos=True)[:, 1]
    sq = h1 * h1
    assert abs(sq.mean() - 4 / math.pi**4) <= 3 * sq.std(ddof=1) / math.sqrt(n)


def test_moment_estimate_zero_measure():
    spec = GridSpec.matched(1.0, 0.0, 10)
    m1, m2 = moment_estimate(zero_measure(1), 0.0, spec, 4, 50, seed=1)
    assert m1.mean == 1.0 and m1.stderr == 0.0
    assert m2.mean == 1.0


def test_moment_estimate_is_seed_deterministic_and_thread_independent():
    spec = GridSpec.matched(1.0, 0.0, 10)
    a = realization_values(ATOM_FIXTURE, 0.0, spec, 6, 600, seed=9, threads=1)
    b = realization_values(ATOM_FIXTURE, 0.0, spec, 6, 600, seed=9, threads=3)
    np.testing.assert_array_equal(a, b)
    c = realization_values(ATOM_FIXTURE, 0.0, spec, 6, 600, seed=10)
    assert not np.array_equal(a, c)


def test_moment_estimate_requires_two_realizations():
    with pytest.raises(ValueError):
        moment_estimate(ATOM_FIXTURE, 0.0, GridSpec.matched(1.0, 0.0, 4), 2, 1)


def test_moment_estimate_atoms_mean_near_series():
    # series value of the mean for the atom pair at t = 1
    spec = GridSpec.matched(1.0, 0.0, 30)
    m1, m2 = moment_estimate(ATOM_FIXTURE, 0.0, spec, 10, 4000, seed=2)
    assert abs(m1.mean - 1.0301814294246558) <= 4 * m1.stderr + 5e-4
    assert m2.mean >= m1.mean**2
