"""Numerical laboratory for the Stratonovich solution of the stochastic wave
equation with time-independent Gaussian noise in d = 1, 2.

Three independent routes to the same quantities: Picard iteration on a
noise realization, Feynman-Kac Monte Carlo over Poisson-interpolated
paths, and Fourier-domain chaos formulas.
"""

from .chaos_engine import (
    ConeIndicator,
    GaussianBump,
    KernelQuery,
    SeriesResult,
    decomposition_census,
    fourier_fn,
    kernel_norm_sq,
    mean_term_n2_physical,
    parseval_check,
    skorohod_second_moment,
    stratonovich_mean_series,
    stratonovich_mean_term,
)
from .combinatorics import (
    StratoTerm,
    census,
    enumerate_pair_partitions,
    enumerate_strato_terms,
    hermite_eval,
    involution_number,
    isserlis_expectation,
    partial_pairing_weight,
)
from .feynman_kac import (
    JumpPath,
    fk_chaos_terms,
    fk_mean,
    fk_realization,
    fk_second_moment,
    poisson_simplex_estimate,
    sample_jump_path,
)
from .montecarlo import EstimatorResult
from .noise_model import (
    ATOM_FIXTURE,
    GaussianDensity,
    InfiniteVarianceError,
    NoiseSample,
    Riesz,
    SpectralAtoms,
    condition_c_constant,
    condition_d_constant,
    gamma_eval,
    mollified_variance,
    noise_eval,
    sample_noise,
    zero_measure,
)
from .picard_solver import FieldGrid, GridSpec, chaos_increment, moment_estimate, picard_run
from .wave_kernel import fg_bound_check, g_eval, g_fourier, g_mass, sample_unit_bump, semigroup_check

__version__ = "0.1.0"
