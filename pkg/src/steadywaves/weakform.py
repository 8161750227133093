"""Distributional pairings of the three weak formulations.

Each pairing integrates a weak-form integrand against a compactly supported
C^1 bump test function.  Height-side pairings are tensor trapezoid
quadratures on the rectangle R (panels split at vorticity jump nodes, which
are quadrature nodes by construction); stream- and Euler-side pairings are
evaluated in (q, p) coordinates with the map's Jacobian on a midpoint-in-p
rule.  The two rules are deliberately different second-order quadratures, so
the change-of-variables identity

    p0^2 * I_h(phi~) = I_psi(phi),   phi = pushforward of phi~,

holds with a gap that vanishes under refinement for any admissible field,
solution or not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from .vorticity import VorticityFunction, FlowParameters, gamma_cap, gamma_tilde
from .field import HeightField, _trig_coeffs, _trig_eval
from .grid import Grid
from .transform import PhysicalFields


class SupportError(ValueError):
    """Test-function support touches or leaves the domain interior."""


# -- C^1 bump -----------------------------------------------------------------


def bump1d(t):
    """B(t) = exp(-1/(1-t^2)) inside |t| < 1, else 0; C^infinity."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


def bump1d_deriv(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    w = 1.0 - t[m] ** 2
    out[m] = np.exp(-1.0 / w) * (-2.0 * t[m] / w ** 2)
    return out


def _wrap_q(dq):
    """Wrap offsets into [-pi, pi)."""
    return (dq + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class TestFunction:
    """Separable bump on the rectangle R, periodic in q.

    value(q, p) and grad(q, p) evaluate on tensor grids (q 1-D, p 1-D) and
    return (nq, np) arrays.
    """

    center: tuple
    radii: tuple

    def __post_init__(self):
        q0, pc = self.center
        r1, r2 = self.radii
        if not (r1 > 0 and r2 > 0 and r1 < np.pi):
            raise SupportError("radii must be positive with r_q < pi")
        if not (pc - r2 > -1.0 and pc + r2 < 0.0):
            raise SupportError(
                f"p-support [{pc - r2:g}, {pc + r2:g}] must lie strictly "
                "inside (-1, 0)")

    def value(self, q, p):
        q0, pc = self.center
        r1, r2 = self.radii
        return np.outer(bump1d(_wrap_q(np.asarray(q) - q0) / r1),
                        bump1d((np.asarray(p) - pc) / r2))

    def grad(self, q, p):
        """(d/dq, d/dp) on the tensor grid."""
        q0, pc = self.center
        r1, r2 = self.radii
        bq = bump1d(_wrap_q(np.asarray(q) - q0) / r1)
        bp = bump1d((np.asarray(p) - pc) / r2)
        dbq = bump1d_deriv(_wrap_q(np.asarray(q) - q0) / r1) / r1
        dbp = bump1d_deriv((np.asarray(p) - pc) / r2) / r2
        return np.outer(dbq, bp), np.outer(bq, dbp)


def bump(center, radii) -> TestFunction:
    """A rectangle-domain bump test function."""
    return TestFunction(tuple(center), tuple(radii))


def default_lattice(n_q_centers=4, radii=(np.pi / 4, 0.2),
                    p_centers=(-0.75, -0.5, -0.25)):
    """A lattice of bump centers covering R's interior (default 4 x 3)."""
    qcs = -np.pi + (np.arange(n_q_centers) + 0.5) * 2.0 * np.pi / n_q_centers
    return [bump((qc, pc), radii) for pc in p_centers for qc in qcs]


@dataclass(frozen=True)
class FluidTestFunction:
    """Separable bump directly in the fluid-domain variables (x, y)."""

    center: tuple
    radii: tuple

    def value_xy(self, x, y):
        x0, y0 = self.center
        r1, r2 = self.radii
        return bump1d(_wrap_q(np.asarray(x) - x0) / r1)[:, None] \
            * bump1d((np.asarray(y) - y0) / r2)

    def grad_xy(self, x, y):
        x0, y0 = self.center
        r1, r2 = self.radii
        bx = bump1d(_wrap_q(np.asarray(x) - x0) / r1)[:, None]
        by = bump1d((np.asarray(y) - y0) / r2)
        dbx = bump1d_deriv(_wrap_q(np.asarray(x) - x0) / r1)[:, None] / r1
        dby = bump1d_deriv((np.asarray(y) - y0) / r2) / r2
        return dbx * by, bx * dby


class PushforwardTestFunction:
    """phi(x, y) = phi~(x, psi(x,y)/p0) with chain-rule gradient.

    In (q, p) coordinates the value is phi~(q, p) itself and the Cartesian
    gradient uses the field's derivatives:
        phi_x = phi~_q - (h_q/(1+h_p)) phi~_p,
        phi_y = phi~_p / (d (1+h_p)).
    """

    def __init__(self, tf: TestFunction, field_like, params: FlowParameters):
        self.tf = tf
        self.field = _as_evaluator(field_like)
        self.source = field_like
        self.params = params

    def value_qp(self, q, p):
        return self.tf.value(q, p)

    def grad_xy_at_qp(self, q, p):
        tq, tp = self.tf.grad(q, p)
        hq = self.field.hq_at(q, p)
        hp = self.field.hp_at(q, p)
        one = 1.0 + hp
        return tq - hq / one * tp, tp / (self.params.d * one)

    def value_xy(self, x, y):
        from .transform import invert_height
        if not isinstance(self.source, HeightField):
            raise TypeError("(x, y) evaluation needs a sampled HeightField")
        p = invert_height(self.source, self.params, x, y)
        q0, pc = self.tf.center
        r1, r2 = self.tf.radii
        return bump1d(_wrap_q(np.asarray(x) - q0) / r1) \
            * bump1d((np.asarray(p) - pc) / r2)

    def grad_xy(self, x, y):
        """Cartesian gradient at scattered (x, y) via inversion."""
        from .transform import invert_height
        if not isinstance(self.source, HeightField):
            raise TypeError("(x, y) evaluation needs a sampled HeightField")
        x = np.asarray(x, dtype=float)
        p = np.asarray(invert_height(self.source, self.params, x, y))
        gx = np.empty_like(p)
        gy = np.empty_like(p)
        for idx in np.ndindex(p.shape):
            fx, fy = self.grad_xy_at_qp(np.atleast_1d(x[idx]),
                                        np.atleast_1d(p[idx]))
            gx[idx], gy[idx] = fx[0, 0], fy[0, 0]
        return gx, gy


def pushforward_testfn(tf: TestFunction, field_like,
                       params: FlowParameters) -> PushforwardTestFunction:
    """phi = phi~ composed with the inverse semi-hodograph map."""
    return PushforwardTestFunction(tf, field_like, params)


# -- quadrature helpers --------------------------------------------------------


def _as_evaluator(field_like):
    if isinstance(field_like, HeightField):
        return field_like.evaluator()
    if hasattr(field_like, "h_at"):
        return field_like
    raise TypeError(f"cannot evaluate {type(field_like).__name__} as a field")


def _check_aligned(v: VorticityFunction, npp):
    for b in v.breakpoints:
        jr = (b + 1.0) * npp
        if abs(jr - round(jr)) > 1e-9:
            raise ValueError(
                f"quadrature p-resolution {npp} does not align vorticity "
                f"breakpoint {b}; panels would straddle the jump")


def _height_nodes(nq, npp):
    q = -np.pi + 2.0 * np.pi / nq * np.arange(nq)
    p = np.linspace(-1.0, 0.0, npp + 1)
    wq = 2.0 * np.pi / nq
    wp = np.full(npp + 1, 1.0 / npp)
    wp[0] *= 0.5
    wp[-1] *= 0.5
    return q, p, wq, wp


def _midpoint_nodes(nq, npp):
    q = -np.pi + 2.0 * np.pi / nq * np.arange(nq)
    pm = -1.0 + (np.arange(npp) + 0.5) / npp
    return q, pm, 2.0 * np.pi / nq, 1.0 / npp


def interp_rows(arr, grid: Grid, q_t, p_t):
    """Interpolate node samples (Nq, Np+1): cosine in q, linear in p."""
    coeffs = _trig_coeffs(arr, grid)
    rows = _trig_eval(coeffs, np.asarray(q_t, dtype=float))   # (nq_t, Np+1)
    p_t = np.asarray(p_t, dtype=float)
    jc = np.clip(np.floor((p_t + 1.0) * grid.Np).astype(int), 0, grid.Np - 1)
    t = np.clip((p_t - grid.p[jc]) / grid.dp, 0.0, 1.0)
    return rows[:, jc] * (1.0 - t) + rows[:, jc + 1] * t


# -- pairings -------------------------------------------------------------------


def norm_grad_rect(tf: TestFunction, nq=256, npp=256):
    """L1 norm of |grad phi~| over R (the pairing normalizer)."""
    q, p, wq, wp = _height_nodes(nq, npp)
    tq, tp = tf.grad(q, p)
    return float(wq * np.sum(np.hypot(tq, tp) @ wp))


def pair_height(field_like, v: VorticityFunction, params: FlowParameters,
                tf: TestFunction, nq=None, npp=None):
    """I_h: the weak height-form pairing over R, trapezoid quadrature."""
    ev = _as_evaluator(field_like)
    if nq is None or npp is None:
        g = getattr(field_like, "grid", None)
        nq = nq or (g.Nq if g else 128)
        npp = npp or (g.Np if g else 256)
    _check_aligned(v, npp)
    d = params.d
    q, p, wq, wp = _height_nodes(nq, npp)
    hq = ev.hq_at(q, p)
    hp = ev.hp_at(q, p)
    A = -(1.0 + d * d * hq ** 2) / (2 * d * d * (1.0 + hp) ** 2) \
        + gamma_cap(v, params, p)[None, :] / (2 * d * d)
    B = hq / (1.0 + hp)
    tq, tp = tf.grad(q, p)
    return float(wq * np.sum((A * tp + B * tq) @ wp))


def _phi_on_qp(phi, q, pm, y_at):
    """(value, phi_x, phi_y) of a test function at tensor (q, pm) nodes."""
    if hasattr(phi, "grad_xy_at_qp"):
        val = phi.value_qp(q, pm)
        px, py = phi.grad_xy_at_qp(q, pm)
    else:
        y = y_at(q, pm)
        val = phi.value_xy(q, y)
        px, py = phi.grad_xy(q, y)
    return val, px, py


def pair_stream(fields: PhysicalFields, v: VorticityFunction,
                params: FlowParameters, phi, nq=None, npp=None):
    """I_psi: the weak stream-form pairing over the fluid domain.

    Quadrature in (q, p) coordinates, midpoint rule in p, with the map's
    Jacobian d (1 + h_p) = p0 / psi_y taken from the reconstructed fields.
    """
    g = fields.grid
    nq = nq or g.Nq
    npp = npp or g.Np
    _check_aligned(v, npp)
    q, pm, wq, wp = _midpoint_nodes(nq, npp)
    psi_x = interp_rows(fields.psi_x, g, q, pm)
    psi_y = interp_rows(fields.psi_y, g, q, pm)
    jac = params.p0 / psi_y
    gt = gamma_tilde(v, params, pm)[None, :]
    val, px, py = _phi_on_qp(phi, q, pm,
                             lambda qq, pp: interp_rows(fields.y, g, qq, pp))
    integ = gt * py - psi_x * psi_y * px + 0.5 * (psi_x ** 2 - psi_y ** 2) * py
    return float(wq * wp * np.sum(integ * jac))


def pair_euler(fields: PhysicalFields, params: FlowParameters, phi,
               nq=None, npp=None, v: VorticityFunction | None = None):
    """(R1, R2, R3): weak Euler pairings (momentum-x, momentum-y, mass)."""
    g = fields.grid
    nq = nq or g.Nq
    npp = npp or g.Np
    if v is not None:
        _check_aligned(v, npp)
    q, pm, wq, wp = _midpoint_nodes(nq, npp)
    u = interp_rows(fields.u, g, q, pm)
    vv = interp_rows(fields.v, g, q, pm)
    P = interp_rows(fields.P, g, q, pm)
    psi_y = interp_rows(fields.psi_y, g, q, pm)
    jac = params.p0 / psi_y
    val, px, py = _phi_on_qp(phi, q, pm,
                             lambda qq, pp: interp_rows(fields.y, g, qq, pp))
    c = params.c
    R1 = np.sum(((u * u - c * u + P) * px + u * vv * py) * jac)
    R2 = np.sum(((u * vv - c * vv) * px + (vv * vv + P) * py
                 - params.g * val) * jac)
    R3 = np.sum((u * px + vv * py) * jac)
    return float(wq * wp * R1), float(wq * wp * R2), float(wq * wp * R3)


def norm_grad_fluid(fields: PhysicalFields, params: FlowParameters, phi,
                    nq=None, npp=None):
    """L1 norm of |grad phi| over the fluid domain."""
    g = fields.grid
    nq = nq or g.Nq
    npp = npp or g.Np
    q, pm, wq, wp = _midpoint_nodes(nq, npp)
    psi_y = interp_rows(fields.psi_y, g, q, pm)
    jac = params.p0 / psi_y
    _, px, py = _phi_on_qp(phi, q, pm,
                           lambda qq, pp: interp_rows(fields.y, g, qq, pp))
    return float(wq * wp * np.sum(np.hypot(px, py) * jac))


def cross_identity(field_like, v: VorticityFunction, params: FlowParameters,
                   tf: TestFunction, nq=256, npp=256):
    """(lhs, rhs, gap) of p0^2 I_h(phi~) = I_psi(pushforward phi~).

    Valid for any admissible field; the two sides use different quadrature
    rules (trapezoid vs midpoint in p), so the gap is a genuine discretization
    residual that vanishes under refinement.
    """
    _check_aligned(v, npp)
    ev = _as_evaluator(field_like)
    d, p0 = params.d, params.p0
    lhs = p0 ** 2 * pair_height(ev, v, params, tf, nq=nq, npp=npp)

    q, pm, wq, wp = _midpoint_nodes(nq, npp)
    hq = ev.hq_at(q, pm)
    hp = ev.hp_at(q, pm)
    one = 1.0 + hp
    psi_x = -p0 * hq / one
    psi_y = p0 / (d * one)
    phi = PushforwardTestFunction(tf, ev, params)
    px, py = phi.grad_xy_at_qp(q, pm)
    gt = gamma_tilde(v, params, pm)[None, :]
    integ = gt * py - psi_x * psi_y * px + 0.5 * (psi_x ** 2 - psi_y ** 2) * py
    rhs = float(wq * wp * np.sum(integ * d * one))
    return lhs, rhs, abs(lhs - rhs)


def cross_identity_refinement(field_like, v, params, tf, quads):
    """Run cross_identity over a list of (nq, npp) levels."""
    return [cross_identity(field_like, v, params, tf, nq=nq, npp=npp)
            for nq, npp in quads]


def surface_identity(field_like, params: FlowParameters, Q=None, nq=None):
    """Pointwise algebraic surface identity and the dynamic-condition residual.

    Both sides are computed from the same h-derivatives on the surface row:
      lhs = (1/d^2 + h_q^2) p0^2/(1+h_p)^2 + 2 g d (1 + h),
      rhs = |grad psi|^2 + 2 g (y + d).
    Their gap is pure round-off for any admissible field; |lhs - Q| is the
    surface-condition residual.
    """
    ev = _as_evaluator(field_like)
    if Q is None:
        Q = getattr(field_like, "Q", None)
        if Q is None:
            raise ValueError("Q must be supplied")
    d, p0, g = params.d, params.p0, params.g
    grid = getattr(field_like, "grid", None)
    if nq is None:
        nq = grid.Nq if grid else 256
    q = -np.pi + 2.0 * np.pi / nq * np.arange(nq)
    p0v = np.array([0.0])
    h = ev.h_at(q, p0v)[:, 0]
    hq = ev.hq_at(q, p0v)[:, 0]
    hp = ev.hp_at(q, p0v)[:, 0]
    one = 1.0 + hp
    lhs = (1.0 / d ** 2 + hq ** 2) * p0 ** 2 / one ** 2 + 2 * g * d * (1.0 + h)
    psi_x = -p0 * hq / one
    psi_y = p0 / (d * one)
    y = d * h
    rhs = psi_x ** 2 + psi_y ** 2 + 2 * g * (y + d)
    scale = max(abs(float(Q)), np.max(np.abs(lhs)))
    return {
        "identity_gap_rel": float(np.max(np.abs(lhs - rhs)) / scale),
        "surface_residual": float(np.max(np.abs(lhs - float(Q)))),
    }


# -- mollification diagnostic ---------------------------------------------------


def _mollify(arr, mq, mp):
    """Separable bump-kernel smoothing: periodic in q, clamped in p."""
    tq = np.arange(-mq, mq + 1) / (mq + 0.5)
    tp = np.arange(-mp, mp + 1) / (mp + 0.5)
    kq = bump1d(tq)
    kq /= kq.sum()
    kp = bump1d(tp)
    kp /= kp.sum()
    out = convolve1d(arr, kq, axis=0, mode="wrap")
    return convolve1d(out, kp, axis=1, mode="nearest")


def mollification_rate(fields: PhysicalFields, params: FlowParameters,
                       eps_list, tf: TestFunction | None = None):
    """Observed mollification rates of F = P + |grad psi|^2/2 + g y and psi.

    Convolves F and the stream derivatives with a bump mollifier at each
    scale eps, measures the sup-norm differences on the test-function
    support (these are the quantities the epsilon-estimates of the
    equivalence proof control, decaying like eps^alpha for C^{0,alpha}
    data), and also splits the pairing
    integral F (psi_y phi_x - psi_x phi_y) into its difference and smooth
    parts.  Fits log-log slopes and reports alpha_hat together with the
    sign of 3 alpha_hat - 1.  Diagnostic only: no pass/fail.
    """
    from .field import spectral_dq

    g = fields.grid
    if tf is None:
        tf = bump((0.0, -0.5), (np.pi / 3, 0.25))
    eps_list = sorted(float(e) for e in eps_list)
    dmin = max(g.dq, g.dp)
    for e in eps_list:
        if e < 2.0 * dmin:
            raise ValueError(f"eps={e:g} is below 2 grid spacings ({2 * dmin:g})")
    F = fields.P + 0.5 * (fields.psi_x ** 2 + fields.psi_y ** 2) \
        + params.g * fields.y
    q, p = g.q, g.p
    wq = g.dq
    wp = np.full(g.Np + 1, g.dp)
    wp[0] *= 0.5
    wp[-1] *= 0.5
    # chain-rule gradient of the pushforward of tf on the node grid,
    # with h-derivatives recovered from y = d (h + p)
    tq_, tp_ = tf.grad(q, p)
    supp = tf.value(q, p) > 0.0
    hp = g.node_dp(np.asarray(fields.y)) / params.d - 1.0
    hq = spectral_dq(fields.y) / params.d
    one = 1.0 + hp
    px = tq_ - hq / one * tp_
    py = tp_ / (params.d * one)
    jac = params.d * one

    def pairing(Fa, sx, sy):
        return float(wq * np.sum(((Fa * sy) * px - (Fa * sx) * py) * jac @ wp))

    def supnorm(arr):
        return float(np.max(np.abs(arr[supp]))) if np.any(supp) else 0.0

    total = pairing(F, fields.psi_x, fields.psi_y)
    mixed, smooth, dF, dpsi = [], [], [], []
    for e in eps_list:
        mq = max(2, int(round(e / g.dq)))
        mp = max(2, int(round(e / g.dp)))
        Fe = _mollify(F, mq, mp)
        sxe = _mollify(fields.psi_x, mq, mp)
        sye = _mollify(fields.psi_y, mq, mp)
        sm = pairing(Fe, sxe, sye)
        smooth.append(sm)
        mixed.append(total - sm)
        dF.append(supnorm(F - Fe))
        dpsi.append(max(supnorm(fields.psi_x - sxe),
                        supnorm(fields.psi_y - sye)))

    def slope(vals):
        vals = np.abs(np.asarray(vals))
        if np.max(vals) < 1e-14:
            return float("inf")  # already smooth at machine level
        return float(np.polyfit(np.log(eps_list), np.log(vals + 1e-300), 1)[0])

    alpha_F, alpha_psi = slope(dF), slope(dpsi)
    alpha_hat = min(alpha_F, alpha_psi)
    return {
        "eps": list(eps_list),
        "F_diff_sup": [float(x) for x in dF],
        "psi_diff_sup": [float(x) for x in dpsi],
        "mixed": [float(x) for x in mixed],
        "smooth": [float(x) for x in smooth],
        "total": total,
        "alpha_F": alpha_F,
        "alpha_psi": alpha_psi,
        "alpha_hat": alpha_hat,
        "three_alpha_minus_one_positive": 3.0 * alpha_hat - 1.0 > 0.0,
    }


# -- reporting -------------------------------------------------------------------


@dataclass
class PairingReport:
    """Values of one formulation's pairings across test functions and levels."""

    formulation: str
    per_testfn: list = field(default_factory=list)
    refinement: list = field(default_factory=list)
    fitted_rates: dict = field(default_factory=dict)

    def max_normalized(self):
        vals = [abs(e["value"]) / max(e["normalizer"], 1e-300)
                for e in self.per_testfn]
        return max(vals) if vals else 0.0

    def to_dict(self):
        return {
            "formulation": self.formulation,
            "per_testfn": self.per_testfn,
            "refinement": self.refinement,
            "fitted_rates": self.fitted_rates,
            "max_normalized": self.max_normalized(),
        }
