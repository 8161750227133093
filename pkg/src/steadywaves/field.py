"""Height fields on the rectangle R and their interpolating evaluators.

A HeightField stores node samples h(q_i, p_j) on the full periodic q-grid,
even in q and zero on the bed row.  Off-grid evaluation uses trigonometric
(cosine) interpolation in q and piecewise-linear interpolation in p, never
straddling a vorticity layer boundary; derivative samples come from the
grid's per-layer stencils.  AnalyticHeightField provides the same interface
from closed-form coefficients and is used for synthetic admissible fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .grid import Grid


def spectral_dq(h):
    """Spectral q-derivative along axis 0 of periodic samples (Nq, ...)."""
    Nq = h.shape[0]
    k = np.fft.rfftfreq(Nq, d=1.0 / Nq)
    mult = 1j * k
    mult[-1] = 0.0  # odd Nyquist derivative is not representable
    shape = (len(k),) + (1,) * (h.ndim - 1)
    return np.fft.irfft(np.fft.rfft(h, axis=0) * mult.reshape(shape),
                        n=Nq, axis=0)


def _trig_coeffs(rows, grid):
    """Complex trigonometric-series coefficients of real periodic rows.

    rows: (Nq, M) sampled at q_i = -pi + i dq.  Returns c: (nh+1, M) complex
    with f(q) = Re( sum_k c_k exp(i k q) ), valid for any parity in q.
    """
    nh = grid.Nq // 2
    rolled = np.roll(rows, -nh, axis=0)  # sample 0 at q = 0
    c = np.fft.rfft(rolled, axis=0) / grid.Nq
    c[1:-1] *= 2.0
    return c


def _trig_eval(c, q, deriv=False):
    """Evaluate the series (nh+1, M) at q (nq,): real result (nq, M)."""
    ks = np.arange(c.shape[0])
    phase = np.exp(1j * np.outer(np.asarray(q, dtype=float), ks))
    if deriv:
        phase = phase * (1j * ks)
    return np.real(phase @ c)


@dataclass
class HeightField:
    """Node samples of the modified height on a Grid, with Bernoulli head."""

    grid: Grid
    h: np.ndarray  # (Nq, Np+1)
    Q: float

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if self.h.shape != (self.grid.Nq, self.grid.Np + 1):
            raise ValueError(f"h has shape {self.h.shape}, expected "
                             f"{(self.grid.Nq, self.grid.Np + 1)}")

    def h_q(self):
        """Spectral q-derivative at all nodes."""
        return spectral_dq(self.h)

    def h_p(self, upper=False):
        """Per-layer p-derivative at all nodes.

        At jump nodes the one-sided value comes from the layer below unless
        `upper` is set.
        """
        return self.grid.node_dp(self.h, upper=upper)

    def surface(self):
        return self.h[:, -1]

    def surface_mean(self):
        return float(np.mean(self.h[:, -1]))

    def amplitude(self, d=1.0):
        """d * (h(0, 0) - h(pi, 0)) / 2, crest-minus-trough half height."""
        return d * (self.h[self.grid.i_q0, -1] - self.h[0, -1]) / 2.0

    def min_one_plus_hp(self):
        return float(np.min(1.0 + self.h_p()))

    def evaluator(self):
        return SampledEvaluator(self)

    def copy(self):
        return HeightField(self.grid, self.h.copy(), self.Q)


def check_invariants(hf: HeightField):
    """Measured invariant violations: bed, evenness, surface mean, stagnation."""
    g = hf.grid
    full = hf.h
    mirrored = full[(-np.arange(g.Nq)) % g.Nq]  # h(-q) on the same index set
    return {
        "bed_max": float(np.max(np.abs(full[:, 0]))),
        "evenness_max": float(np.max(np.abs(full - mirrored))),
        "surface_mean": hf.surface_mean(),
        "min_one_plus_hp": hf.min_one_plus_hp(),
    }


class SampledEvaluator:
    """Tensor-grid evaluation of a sampled field: cosine in q, linear in p."""

    def __init__(self, hf: HeightField):
        self.grid = hf.grid
        g = self.grid
        self._ah = _trig_coeffs(hf.h, g)                  # h rows
        hp_lo = hf.h_p(upper=False)
        hp_hi = hf.h_p(upper=True)
        self._ahp_lo = _trig_coeffs(hp_lo, g)
        self._ahp_hi = _trig_coeffs(hp_hi, g)

    def _locate(self, p):
        g = self.grid
        p = np.asarray(p, dtype=float)
        if np.any(p < -1.0 - 1e-12) or np.any(p > 1e-12):
            raise ValueError("p out of [-1, 0]")
        jc = np.clip(np.floor((p + 1.0) * g.Np).astype(int), 0, g.Np - 1)
        t = (p - g.p[jc]) / g.dp
        return jc, np.clip(t, 0.0, 1.0)

    def h_at(self, q, p):
        jc, t = self._locate(p)
        lo = _trig_eval(self._ah[:, jc], q)
        hi = _trig_eval(self._ah[:, jc + 1], q)
        return lo * (1.0 - t) + hi * t

    def hq_at(self, q, p):
        jc, t = self._locate(p)
        lo = _trig_eval(self._ah[:, jc], q, deriv=True)
        hi = _trig_eval(self._ah[:, jc + 1], q, deriv=True)
        return lo * (1.0 - t) + hi * t

    def hp_at(self, q, p):
        # cell-interior value: upper-sided at the cell's lower node, lower-sided
        # at its upper node, so the interpolation stays within one layer
        jc, t = self._locate(p)
        lo = _trig_eval(self._ahp_hi[:, jc], q)
        hi = _trig_eval(self._ahp_lo[:, jc + 1], q)
        return lo * (1.0 - t) + hi * t


class AnalyticHeightField:
    """Closed-form even periodic field h = sum_n c_n cos(k_n q) * P_n(p).

    P_n are polynomials (ascending coefficients) with P_n(-1) = 0 so the bed
    condition holds exactly.  Provides the same tensor evaluator interface
    as SampledEvaluator, with exact derivatives.
    """

    def __init__(self, terms, Q=0.0):
        self.terms = []
        for k, coeffs, c in terms:
            coeffs = np.asarray(coeffs, dtype=float)
            if abs(npoly.polyval(-1.0, coeffs)) > 1e-13 * max(1, np.abs(coeffs).max()):
                raise ValueError("p-polynomial must vanish at the bed p=-1")
            self.terms.append((int(k), coeffs, float(c)))
        self.Q = Q

    def h_at(self, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        out = np.zeros((len(q), len(p)))
        for k, coeffs, c in self.terms:
            out += c * np.outer(np.cos(k * q), npoly.polyval(p, coeffs))
        return out

    def hq_at(self, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        out = np.zeros((len(q), len(p)))
        for k, coeffs, c in self.terms:
            out += -c * k * np.outer(np.sin(k * q), npoly.polyval(p, coeffs))
        return out

    def hp_at(self, q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        out = np.zeros((len(q), len(p)))
        for k, coeffs, c in self.terms:
            out += c * np.outer(np.cos(k * q),
                                npoly.polyval(p, npoly.polyder(coeffs)))
        return out

    def sample(self, grid: Grid, Q=None) -> HeightField:
        """Sample onto a grid as a HeightField."""
        h = self.h_at(grid.q, grid.p)
        return HeightField(grid, h, self.Q if Q is None else Q)


def random_admissible_field(rng, max_hp=0.2, kmax=3, mmax=2, Q=0.0):
    """Random smooth even periodic field with 1 + h_p > 0 guaranteed.

    Coefficients are drawn with mode-decaying scales and the whole field is
    rescaled so max |h_p| <= max_hp < 1.
    """
    terms = []
    for k in range(kmax + 1):
        for m in range(mmax + 1):
            c = rng.standard_normal() / (1.0 + k + m) ** 2
            base = npoly.polymul([1.0, 1.0], npoly.polypow([0.0, 1.0], m) if m
                                 else [1.0])
            terms.append((k, base, c))
    f = AnalyticHeightField(terms, Q=Q)
    qs = np.linspace(-np.pi, np.pi, 128, endpoint=False)
    ps = np.linspace(-1.0, 0.0, 257)
    scale = np.max(np.abs(f.hp_at(qs, ps)))
    factor = max_hp / scale if scale > 0 else 1.0
    return AnalyticHeightField([(k, cs, c * factor) for k, cs, c in f.terms],
                               Q=Q)
