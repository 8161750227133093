"""Flat-surface (q-independent) flows of the height system, used as oracles.

With h_q = 0 the divergence-form interior equation says the vertical flux is
constant, which integrates to

    1 + h_p = (lam + gamma_cap(p))**(-1/2)

for a constant lam > -min gamma_cap.  The zero-mean surface condition pins
lam through  integral_{-1}^{0} (lam + gamma_cap)**(-1/2) dp = 1, and the
dynamic surface condition then gives  Q = 2 g d + p0^2 lam / d^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, IntegrationWarning
from scipy.optimize import brentq

from .vorticity import VorticityFunction, FlowParameters, gamma_cap, gamma_cap_min


class BracketError(RuntimeError):
    """The normalization integral never reaches 1; no admissible lam exists."""


@dataclass(frozen=True)
class LaminarFlow:
    """A q-independent solution sampled on a p-grid."""

    lam: float
    p: np.ndarray
    h: np.ndarray
    h_p: np.ndarray
    Q: float


def _segments(v: VorticityFunction, lo=-1.0, hi=0.0):
    """Quadrature panels split at vorticity breakpoints."""
    cuts = [lo] + [b for b in v.breakpoints if lo < b < hi] + [hi]
    return list(zip(cuts[:-1], cuts[1:]))


def normalization_integral(v: VorticityFunction, params: FlowParameters, lam):
    """integral_{-1}^0 (lam + gamma_cap(p))**(-1/2) dp by adaptive quadrature."""
    total = 0.0
    for a, b in _segments(v):
        with warnings.catch_warnings():
            # near the admissibility floor the integrand has an integrable
            # inverse-square-root endpoint; quad's result is still good
            # enough for bracketing, and the solved lam is re-verified
            warnings.simplefilter("ignore", IntegrationWarning)
            val, _ = quad(lambda s: (lam + gamma_cap(v, params, s)) ** -0.5,
                          a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
        total += val
    return total


def solve_lambda(v: VorticityFunction, params: FlowParameters,
                 tol=1e-12) -> float:
    """The unique lam with |normalization_integral(lam) - 1| <= tol."""
    lam_floor = -gamma_cap_min(v, params)
    lam_lo = lam_floor + 1e-9 * max(1.0, abs(lam_floor))
    g_lo = normalization_integral(v, params, lam_lo)
    if g_lo < 1.0:
        raise BracketError(
            f"normalization integral reaches at most {g_lo:.6g} < 1 "
            f"as lam -> {lam_floor:.6g}; no laminar flow for this vorticity")
    lam_hi = max(1.0, 2.0 * abs(lam_lo))
    while normalization_integral(v, params, lam_hi) >= 1.0:
        lam_hi *= 2.0
        if lam_hi > 1e12:
            raise BracketError("failed to bracket lam from above")
    lam = brentq(lambda x: normalization_integral(v, params, x) - 1.0,
                 lam_lo, lam_hi, xtol=1e-15, rtol=8.9e-16)
    resid = abs(normalization_integral(v, params, lam) - 1.0)
    if resid > tol:
        raise RuntimeError(f"lambda solve stalled, |integral-1| = {resid:.2e}")
    return lam


def laminar_height(lam, v: VorticityFunction, params: FlowParameters, p_grid):
    """h(p) = integral_{-1}^p [(lam+gamma_cap)**(-1/2) - 1] ds on p_grid."""
    p_grid = np.asarray(p_grid, dtype=float)
    if p_grid[0] != -1.0 or np.any(np.diff(p_grid) <= 0):
        raise ValueError("p_grid must start at -1 and increase")
    h = np.zeros_like(p_grid)
    breaks = set(v.breakpoints)
    for j in range(1, len(p_grid)):
        a, b = p_grid[j - 1], p_grid[j]
        cuts = [a] + sorted(x for x in breaks if a < x < b) + [b]
        acc = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            val, _ = quad(lambda s: (lam + gamma_cap(v, params, s)) ** -0.5 - 1.0,
                          lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
            acc += val
        h[j] = h[j - 1] + acc
    return h


def laminar_Q(lam, params: FlowParameters) -> float:
    """Bernoulli head of the laminar flow: Q = 2 g d + p0^2 lam / d^2."""
    return 2.0 * params.g * params.d + params.p0 ** 2 * lam / params.d ** 2


def solve(v: VorticityFunction, params: FlowParameters, p_grid) -> LaminarFlow:
    """Full laminar solve: lam, profile and Q on the given p-grid."""
    lam = solve_lambda(v, params)
    p_grid = np.asarray(p_grid, dtype=float)
    h = laminar_height(lam, v, params, p_grid)
    h_p = (lam + gamma_cap(v, params, p_grid)) ** -0.5 - 1.0
    return LaminarFlow(lam=lam, p=p_grid, h=h, h_p=h_p, Q=laminar_Q(lam, params))
