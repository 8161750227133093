"""Piecewise-polynomial vorticity functions and their exact antiderivatives.

The vorticity gamma lives on the normalized streamline coordinate
p in [-1, 0] and may jump at interior breakpoints.  Both antiderivatives
used by the formulations,

    gamma_tilde(p) = integral_0^p  p0 * gamma(s) ds
    gamma_cap(p)   = integral_0^p  2 d^2 * gamma(s) / p0 ds

are computed in closed form from the polynomial coefficients, so they are
continuous across jumps and exact to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly


class DomainError(ValueError):
    """Evaluation point outside [-1, 0]."""


def _as_scalar_or_array(p):
    arr = np.asarray(p, dtype=float)
    if np.any(arr < -1.0 - 1e-14) or np.any(arr > 1e-14):
        raise DomainError(f"p must lie in [-1, 0], got range "
                          f"[{arr.min():g}, {arr.max():g}]")
    return arr, np.isscalar(p) or arr.ndim == 0


@dataclass(frozen=True)
class FlowParameters:
    """Physical constants of the flow.

    d      mean depth (> 0)
    g      gravitational acceleration (> 0)
    c      wave speed (> 0)
    p0     relative mass flux (< 0)
    P_atm  atmospheric pressure in dynamic-pressure units
    Q      Bernoulli head of the surface condition; None until determined
    """

    d: float
    g: float
    c: float
    p0: float
    P_atm: float = 0.0
    Q: float | None = None

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"depth d must be positive, got {self.d}")
        if not self.g > 0:
            raise ValueError(f"gravity g must be positive, got {self.g}")
        if not self.c > 0:
            raise ValueError(f"wave speed c must be positive, got {self.c}")
        if not self.p0 < 0:
            raise ValueError(f"mass flux p0 must be negative, got {self.p0}")


@dataclass(frozen=True)
class VorticityFunction:
    """gamma as ordered polynomial pieces partitioning [-1, 0].

    pieces: tuple of (p_lo, p_hi, coeffs) with ascending-power coeffs,
    intervals contiguous and increasing, first p_lo = -1, last p_hi = 0.
    """

    pieces: tuple
    _edges: np.ndarray = field(init=False, repr=False, compare=False)
    _coeffs: tuple = field(init=False, repr=False, compare=False)
    _anti: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pieces = tuple((float(lo), float(hi), tuple(float(c) for c in cs))
                       for lo, hi, cs in self.pieces)
        if not pieces:
            raise ValueError("vorticity needs at least one piece")
        if pieces[0][0] != -1.0 or pieces[-1][1] != 0.0:
            raise ValueError("pieces must cover [-1, 0] exactly")
        for (lo, hi, cs) in pieces:
            if not hi > lo:
                raise ValueError(f"empty or reversed piece [{lo}, {hi}]")
            if not cs:
                raise ValueError("piece needs at least one coefficient")
        for (_, hi, _), (lo, _, _) in zip(pieces[:-1], pieces[1:]):
            if hi != lo:
                raise ValueError(f"pieces must be contiguous, gap at {hi} vs {lo}")
        object.__setattr__(self, "pieces", pieces)
        edges = np.array([p[0] for p in pieces] + [0.0])
        coeffs = tuple(np.array(p[2]) for p in pieces)
        # antiderivative I(p) = int_0^p gamma, assembled top piece down so
        # that I(0) = 0 and I is continuous at every breakpoint
        anti = [None] * len(pieces)
        const = 0.0  # value of I at the upper edge of the current piece
        for k in range(len(pieces) - 1, -1, -1):
            a = npoly.polyint(coeffs[k])
            a[0] += const - npoly.polyval(edges[k + 1], a)
            anti[k] = a
            const = npoly.polyval(edges[k], a)
        object.__setattr__(self, "_edges", edges)
        object.__setattr__(self, "_coeffs", coeffs)
        object.__setattr__(self, "_anti", tuple(anti))

    @property
    def breakpoints(self):
        """Interior piece boundaries in (-1, 0)."""
        return tuple(self._edges[1:-1])

    @property
    def jump_points(self):
        """Interior breakpoints where gamma is actually discontinuous."""
        out = []
        for b in self.breakpoints:
            if self.eval(b, side="left") != self.eval(b, side="right"):
                out.append(b)
        return tuple(out)

    def _piece_index(self, p, side):
        if side == "right":
            idx = np.searchsorted(self._edges, p, side="right") - 1
        elif side == "left":
            idx = np.searchsorted(self._edges, p, side="left") - 1
        else:
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        return np.clip(idx, 0, len(self.pieces) - 1)

    def eval(self, p, side="right"):
        """gamma(p); `side` picks the one-sided value at a jump."""
        arr, scalar = _as_scalar_or_array(p)
        idx = self._piece_index(arr, side)
        out = np.empty_like(arr, dtype=float)
        for k, cs in enumerate(self._coeffs):
            m = idx == k
            if np.any(m):
                out[m] = npoly.polyval(arr[m], cs)
        return float(out) if scalar else out

    def integral(self, p):
        """I(p) = integral_0^p gamma(s) ds, exact and continuous."""
        arr, scalar = _as_scalar_or_array(p)
        idx = self._piece_index(arr, "right")
        out = np.empty_like(arr, dtype=float)
        for k, a in enumerate(self._anti):
            m = idx == k
            if np.any(m):
                out[m] = npoly.polyval(arr[m], a)
        return float(out) if scalar else out

    def bounds(self):
        """(inf, sup) of gamma over [-1, 0], exact per-piece extrema."""
        lo, hi = np.inf, -np.inf
        for (a, b, _), cs in zip(self.pieces, self._coeffs):
            cand = [npoly.polyval(a, cs), npoly.polyval(b, cs)]
            if len(cs) > 1:
                dcs = npoly.polyder(cs)
                roots = npoly.polyroots(dcs) if len(dcs) > 1 or dcs[0] != 0 else []
                for r in np.atleast_1d(roots):
                    if abs(r.imag) < 1e-12 and a <= r.real <= b:
                        cand.append(npoly.polyval(r.real, cs))
            lo = min(lo, min(cand))
            hi = max(hi, max(cand))
        return float(lo), float(hi)


def eval_gamma(v: VorticityFunction, p, side="right"):
    """One-sided evaluation of the vorticity function."""
    return v.eval(p, side=side)


def gamma_tilde(v: VorticityFunction, params: FlowParameters, p):
    """gamma_tilde(p) = integral_0^p p0 * gamma; continuous, 0 at p=0."""
    return params.p0 * v.integral(p)


def gamma_cap(v: VorticityFunction, params: FlowParameters, p):
    """gamma_cap(p) = 2 d^2 / p0 * integral_0^p gamma; continuous, 0 at p=0."""
    return (2.0 * params.d ** 2 / params.p0) * v.integral(p)


def gamma_cap_min(v: VorticityFunction, params: FlowParameters):
    """Exact minimum of gamma_cap over [-1, 0] (per-piece polynomial extrema)."""
    scale = 2.0 * params.d ** 2 / params.p0
    lo = np.inf
    for k, (a, b, _) in enumerate(v.pieces):
        anti = v._anti[k]
        cand = [npoly.polyval(a, anti), npoly.polyval(b, anti)]
        der = v._coeffs[k]  # derivative of the antiderivative is gamma itself
        if len(der) > 1 or der[0] != 0:
            for r in np.atleast_1d(npoly.polyroots(der)):
                if abs(r.imag) < 1e-12 and a <= r.real <= b:
                    cand.append(npoly.polyval(r.real, anti))
        vals = scale * np.asarray(cand, dtype=float)
        lo = min(lo, vals.min())
    return float(lo)


def bound_gamma(v: VorticityFunction):
    """(inf, sup) of gamma over [-1, 0]."""
    return v.bounds()


def zero_vorticity():
    """gamma identically zero on [-1, 0]."""
    return VorticityFunction(pieces=((-1.0, 0.0, (0.0,)),))


def two_layer(A, p_jump=-0.5):
    """gamma = A on [-1, p_jump), 0 on [p_jump, 0]: a sheared bottom layer."""
    if not -1.0 < p_jump < 0.0:
        raise ValueError("jump point must be interior to (-1, 0)")
    return VorticityFunction(pieces=((-1.0, p_jump, (float(A),)),
                                     (p_jump, 0.0, (0.0,))))
