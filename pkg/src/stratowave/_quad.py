"""Adaptive quadrature wrappers with explicit failure reporting."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

ABS_TOL = 1e-9
REL_TOL = 1e-10
MAX_SUBDIVISIONS = 500


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature cannot reach the requested tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual estimate {residual:.3e})")
        self.residual = residual


def quad(func, a, b, *, epsabs=ABS_TOL, epsrel=REL_TOL, limit=MAX_SUBDIVISIONS, points=None, **kw):
    """scipy.integrate.quad that raises instead of warning.

    Returns ``(value, abserr)``.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(
            func, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, points=points, full_output=1, **kw
        )
    value, abserr = out[0], out[1]
    if len(out) > 3:
        # ier > 0; accept only if the error estimate still meets the target
        target = max(epsabs, epsrel * abs(value))
        if not math.isfinite(value) or abserr > 100 * target:
            raise QuadratureError(f"quad on [{a}, {b}] did not converge: {out[3].splitlines()[0]}", abserr)
    if not math.isfinite(value):
        raise QuadratureError(f"quad on [{a}, {b}] returned {value}", float("inf"))
    return value, abserr


def power_singular_quad(func, power, upper, **kw):
    """Integrate ``func(r) * r**(power - 1)`` over ``[0, upper]``.

    ``power > 0``.  The endpoint singularity at 0 is removed with
    ``u = r**power`` on [0, 1]; the remainder uses ``r = exp(s)`` so that
    very long ranges (cutoffs up to 1e4 and beyond) stay well resolved.
    ``upper`` may be ``np.inf``.
    """
    if power <= 0:
        raise ValueError("power must be positive")
    head_end = min(1.0, upper)

    def head(u):
        r = u ** (1.0 / power)
        return func(r) / power

    total, err = quad(head, 0.0, head_end**power, **kw)
    if upper <= 1.0:
        return total, err
    if math.isinf(upper):
        tail, terr = quad(lambda r: func(r) * r ** (power - 1.0), 1.0, np.inf, **kw)
    else:
        # split by decades; each piece in log variable
        edges = np.log(np.concatenate([[1.0], 10.0 ** np.arange(1, math.ceil(math.log10(upper)) + 1)]))
        edges = edges[edges < math.log(upper)]
        edges = np.append(edges, math.log(upper))
        tail, terr = 0.0, 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, e = quad(lambda s: func(math.exp(s)) * math.exp(power * s), lo, hi, **kw)
            tail += v
            terr += e
    return total + tail, err + terr
