"""Fast deterministic self-checks across all modules (``stratowave verify``)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import chaos_engine as ce
from . import combinatorics as cb
from . import feynman_kac as fk
from . import noise_model as nm
from . import picard_solver as ps
from . import wave_kernel as wk


@dataclass(frozen=True)
class Check:
    module: str
    name: str
    passed: bool
    detail: str


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def _noise_checks():
    m = nm.ATOM_FIXTURE
    yield "gamma of the atom pair", abs(nm.gamma_eval(m, 1.0) + 1.0) < 1e-15, ""
    yield "mollified variance at eps=1", _rel(nm.mollified_variance(m, 1.0), math.exp(-math.pi**2)) < 1e-14, ""
    r = nm.Riesz(0.5, 1)
    c1, c2, c3 = (nm.condition_c_constant(r, c) for c in (1e2, 1e3, 1e4))
    yield "condition (C) Cauchy for alpha=0.5", (c3 - c2) < (c2 - c1), f"{c1:.6g} {c2:.6g} {c3:.6g}"
    lhs, rhs = ce.parseval_check(m, ce.GaussianBump(0.7))
    yield "Parseval, Gaussian bump on atoms", _rel(lhs, rhs) < 1e-8, f"{lhs:.12g} vs {rhs:.12g}"


def _kernel_checks():
    for d in (1, 2):
        q = wk.g_mass_quadrature(3.0, d)
        yield f"mass of G(3, .) in d={d}", _rel(q, 3.0) < 1e-6, f"{q:.12g}"
    grid = np.linspace(-50, 50, 10_000)
    yield "Fourier bound on a grid", all(wk.fg_bound_check(t, grid) for t in (0.5, 1.0, 10.0)), ""
    lhs, rhs = wk.semigroup_check(0.0, 1.0, 0.0, 0.0, 1)
    yield "semigroup closed form 1/8", abs(lhs - 0.125) < 1e-6 and lhs <= rhs, f"{lhs:.12g}"


def _combinatorics_checks():
    table = {1: [1], 2: [1, 1], 3: [1, 3], 4: [1, 6, 3], 5: [1, 10, 15], 6: [1, 15, 45, 15]}
    yield "term census n<=6", all(cb.census(n) == c for n, c in table.items()), ""
    yield "involution totals n<=10", all(sum(cb.census(n)) == cb.involution_number(n) for n in range(1, 11)), ""
    rng = np.random.default_rng(0)
    a = rng.standard_normal((6, 6))
    cov = a @ a.T
    yield "Isserlis enumeration vs DP", _rel(cb.isserlis_expectation(cov), cb._hafnian_dp(cov)) < 1e-12, ""


def _chaos_checks():
    m = nm.ATOM_FIXTURE
    v, _ = ce.kernel_norm_sq(1, 1.0, 0.0, m)
    yield "first kernel norm 4/pi^4", _rel(v, 4 / math.pi**4) < 1e-10, f"{v:.15g}"
    spec, _ = ce.stratonovich_mean_term(2, 1.0, m)
    phys = ce.mean_term_n2_physical(1.0, m)
    yield "n=2 mean term, two routes", _rel(spec, phys) < 1e-6, f"{spec:.12g} vs {phys:.12g}"
    r = [1.3, 0.4, 2.2]
    yield "simplex integral vs quadrature", _rel(ce.simplex_integral(r, 1.0), ce.simplex_integral_quadrature(r, 1.0)) < 1e-8, ""


def _picard_checks():
    spec = ps.GridSpec.matched(1.0, 0.0, 20)
    for scheme in ("cone", "diamond"):
        v1 = ps.picard_run(nm.constant_noise(0.7), spec, 1, scheme)[1].at_center()
        yield f"one step, constant noise ({scheme})", abs(v1 - 1.35) < 1e-12, f"{v1:.15g}"
    zero = ps.picard_run(nm.sample_noise(nm.zero_measure(), 0.0), spec, 3)
    yield "zero noise keeps v = 1", all(np.all(g.values == 1.0) for g in zero), ""


def _fk_checks():
    res = fk.fk_mean(nm.zero_measure(), 0.0, 1.0, 0.0, 20_000, seed=1)
    yield "zero noise mean", abs(res.mean - 1.0) <= 4 * res.stderr + 1e-12, f"{res.mean:.6g} +- {res.stderr:.2g}"
    res = fk.poisson_simplex_estimate(1.0, 2, 100_000, seed=1)
    yield "Poisson-simplex identity n=2", res.z_score(1 / 24) < 4, f"{res.mean:.6g} +- {res.stderr:.2g}"


SUITES: dict[str, Callable] = {
    "noise_model": _noise_checks,
    "wave_kernel": _kernel_checks,
    "combinatorics": _combinatorics_checks,
    "chaos_engine": _chaos_checks,
    "picard_solver": _picard_checks,
    "feynman_kac": _fk_checks,
}


def run_verify() -> list[Check]:
    out = []
    for module, suite in SUITES.items():
        for name, ok, detail in suite():
            out.append(Check(module, name, bool(ok), detail))
    return out
