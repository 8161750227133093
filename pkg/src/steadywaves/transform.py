"""Semi-hodograph transform: physical fields from a height field.

The map (q, p) -> (x, y) = (q, d [h(q,p) + p]) carries the rectangle R onto
the fluid domain; its inverse recovers p = psi(x,y)/p0.  The stream function
is reconstructed as psi = p0 * p on p-levels (never by integrating
velocities, so the boundary values are exact), its derivatives from

    psi_x = -p0 h_q / (1 + h_p),      psi_y = p0 / (d (1 + h_p)),

velocities from psi_y = u - c, psi_x = -v, and the pressure from the
Bernoulli identity with the additive constant pinned by P = P_atm at the
surface.  q-derivatives are spectral on the periodic even grid; p-derivatives
use the grid's per-layer stencils.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vorticity import VorticityFunction, FlowParameters, gamma_tilde
from .field import HeightField, _trig_coeffs, _trig_eval
from .solver import StagnationError


class DomainError(ValueError):
    """Point outside the fluid domain."""


@dataclass
class PhysicalFields:
    """Field samples on the curvilinear image of the (q, p) grid."""

    x: np.ndarray        # (Nq,)
    y: np.ndarray        # (Nq, Np+1)
    eta: np.ndarray      # (Nq,)
    psi: np.ndarray      # (Nq, Np+1)
    psi_x: np.ndarray
    psi_y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    P: np.ndarray
    Q: float
    grid: object

    def copy(self):
        return PhysicalFields(self.x.copy(), self.y.copy(), self.eta.copy(),
                              self.psi.copy(), self.psi_x.copy(),
                              self.psi_y.copy(), self.u.copy(), self.v.copy(),
                              self.P.copy(), self.Q, self.grid)


def physical_map(hf: HeightField, params: FlowParameters):
    """(x, y, eta): node positions in the fluid domain and the surface."""
    d = params.d
    y = d * (hf.h + hf.grid.p[None, :])
    if np.any(np.diff(y, axis=1) <= 0):
        raise StagnationError("y is not strictly increasing along a q-column")
    eta = d * hf.h[:, -1]
    return hf.grid.q.copy(), y, eta


def invert_height(hf: HeightField, params: FlowParameters, x, y, rtol=1e-12):
    """p with y = d [h(x, p) + p]; exact inverse of the interpolated map.

    x, y may be scalars or equal-shape arrays.
    """
    g = hf.grid
    d = params.d
    scalar = np.isscalar(x) and np.isscalar(y)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("x and y must have matching shapes")
    coeffs = _trig_coeffs(hf.h, g)                    # (nh+1, Np+1)
    hcols = _trig_eval(coeffs, x.ravel())             # (n, Np+1)
    ycols = d * (hcols + g.p[None, :])
    out = np.empty(x.size)
    for n in range(x.size):
        yc = ycols[n]
        if y.ravel()[n] < yc[0] - rtol * d or y.ravel()[n] > yc[-1] + rtol * d:
            raise DomainError(
                f"y={y.ravel()[n]:g} outside [-d, eta(x)] = [{yc[0]:g}, {yc[-1]:g}]")
        j = int(np.clip(np.searchsorted(yc, y.ravel()[n]) - 1, 0, g.Np - 1))
        t = (y.ravel()[n] - yc[j]) / (yc[j + 1] - yc[j])
        out[n] = g.p[j] + np.clip(t, 0.0, 1.0) * g.dp
    return float(out[0]) if scalar else out.reshape(x.shape)


def reconstruct_stream(hf: HeightField, params: FlowParameters):
    """(psi, psi_x, psi_y) at the curvilinear nodes."""
    d, p0 = params.d, params.p0
    hq = hf.h_q()
    hp = hf.h_p()
    one = 1.0 + hp
    if np.min(one) <= 0:
        raise StagnationError("1 + h_p <= 0 during reconstruction")
    psi = np.broadcast_to(p0 * hf.grid.p[None, :], hf.h.shape).copy()
    psi_x = -p0 * hq / one
    psi_y = p0 / (d * one)
    return psi, psi_x, psi_y


def reconstruct_velocity(hf: HeightField, params: FlowParameters):
    """(u, v) with u - c = psi_y and v = -psi_x; u < c everywhere."""
    _, psi_x, psi_y = reconstruct_stream(hf, params)
    return params.c + psi_y, -psi_x


def reconstruct_pressure(hf: HeightField, v: VorticityFunction,
                         params: FlowParameters):
    """Bernoulli pressure, P_atm at the surface when (the surface condition
    holds exactly): P = P_atm + Q/2 - |grad psi|^2/2 - g (y+d) + gamma_tilde."""
    d, g = params.d, params.g
    _, y, _ = physical_map(hf, params)
    _, psi_x, psi_y = reconstruct_stream(hf, params)
    gt = gamma_tilde(v, params, hf.grid.p)[None, :]
    return (params.P_atm + hf.Q / 2.0 - 0.5 * (psi_x ** 2 + psi_y ** 2)
            - g * (y + d) + gt)


def reconstruct_fields(hf: HeightField, v: VorticityFunction,
                       params: FlowParameters) -> PhysicalFields:
    """Full reconstruction: map, stream, velocities and pressure."""
    x, y, eta = physical_map(hf, params)
    psi, psi_x, psi_y = reconstruct_stream(hf, params)
    u, vv = params.c + psi_y, -psi_x
    P = reconstruct_pressure(hf, v, params)
    return PhysicalFields(x=x, y=y, eta=eta, psi=psi, psi_x=psi_x,
                          psi_y=psi_y, u=u, v=vv, P=P, Q=hf.Q, grid=hf.grid)


def bernoulli_function(fields: PhysicalFields, v: VorticityFunction,
                       params: FlowParameters):
    """F = P + |grad psi|^2/2 + g y and the streamline-collapse report.

    F - gamma_tilde(psi/p0) should be the constant F0 = P_atm + Q/2 - g d;
    the maximum deviation measures how far the pressure is from Bernoulli.
    """
    F = fields.P + 0.5 * (fields.psi_x ** 2 + fields.psi_y ** 2) \
        + params.g * fields.y
    gt = gamma_tilde(v, params, fields.psi / params.p0)
    F0 = params.P_atm + fields.Q / 2.0 - params.g * params.d
    collapse = float(np.max(np.abs(F - gt - F0)))
    return F, {"F0": F0, "collapse_err": collapse}


def summary(fields: PhysicalFields, v: VorticityFunction,
            params: FlowParameters):
    """Scalar diagnostics for reports."""
    _, rep = bernoulli_function(fields, v, params)
    return {
        "max_u_minus_c": float(np.max(fields.u - params.c)),
        "surface_pressure_dev": float(
            np.max(np.abs(fields.P[:, -1] - params.P_atm))),
        "bernoulli_collapse_err": rep["collapse_err"],
    }
