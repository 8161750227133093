"""Discretization of the fixed rectangle R = [-pi, pi) x [-1, 0].

The q-grid is uniform periodic with q_i = -pi + i * 2pi/Nq, so it contains
both the evenness axis q = 0 and the trough line q = pi.  The p-grid is
uniform with nodes p_j = -1 + j/Np.  Every vorticity breakpoint must land
exactly on a p-node; derivative stencils in p are built per smooth layer
(5-node, one-sided near layer edges) so they never straddle a jump.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class AlignmentError(ValueError):
    """A vorticity breakpoint does not coincide with a p-node."""


def fd_weights(z, x, m):
    """Finite-difference weights for the m-th derivative at z from nodes x.

    Fornberg's recursion; exact for polynomials of degree len(x)-1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


_STENCIL = 5  # nodes per p-derivative stencil; 4th-order accurate


@dataclass(frozen=True)
class Grid:
    """Tensor grid on R with jump-aligned p-stencil tables."""

    Nq: int
    Np: int
    aligned_jumps: tuple = ()
    q: np.ndarray = field(init=False, repr=False, compare=False)
    p: np.ndarray = field(init=False, repr=False, compare=False)
    dq: float = field(init=False, repr=False, compare=False)
    dp: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.Nq < 8 or self.Nq % 2:
            raise ValueError(f"Nq must be an even integer >= 8, got {self.Nq}")
        if self.Np < 8:
            raise ValueError(f"Np must be >= 8, got {self.Np}")
        jumps = tuple(sorted(float(b) for b in self.aligned_jumps))
        object.__setattr__(self, "aligned_jumps", jumps)
        dq = 2.0 * np.pi / self.Nq
        dp = 1.0 / self.Np
        object.__setattr__(self, "dq", dq)
        object.__setattr__(self, "dp", dp)
        object.__setattr__(self, "q", -np.pi + dq * np.arange(self.Nq))
        object.__setattr__(self, "p", -1.0 + dp * np.arange(self.Np + 1))

        # exact rational alignment of breakpoints with p-nodes
        jidx = [0]
        for b in jumps:
            jr = (b + 1.0) * self.Np
            j = int(round(jr))
            if abs(jr - j) > 1e-9 or not 0 < j < self.Np:
                raise AlignmentError(
                    f"vorticity breakpoint {b} is not a p-node for Np={self.Np}")
            jidx.append(j)
        jidx.append(self.Np)
        if any(b - a < _STENCIL - 1 for a, b in zip(jidx[:-1], jidx[1:])):
            raise ValueError("each vorticity layer needs at least "
                             f"{_STENCIL - 1} p-cells at Np={self.Np}")
        object.__setattr__(self, "_layer_edges", tuple(jidx))

        half_idx = np.empty((self.Np, _STENCIL), dtype=np.intp)
        half_w = np.empty((self.Np, _STENCIL))
        node_idx = np.empty((self.Np + 1, _STENCIL), dtype=np.intp)
        node_w = np.empty((self.Np + 1, _STENCIL))

        def pick(target, lo, hi):
            nodes = np.arange(lo, hi + 1)
            order = np.argsort(np.abs(self.p[nodes] - target), kind="stable")
            sel = np.sort(nodes[order[:_STENCIL]])
            return sel, fd_weights(target, self.p[sel], 1)

        node_idx_hi = np.empty((self.Np + 1, _STENCIL), dtype=np.intp)
        node_w_hi = np.empty((self.Np + 1, _STENCIL))
        for jc in range(self.Np):
            mid = self.p[jc] + 0.5 * dp
            lo, hi = self._layer_of_cell(jc)
            half_idx[jc], half_w[jc] = pick(mid, lo, hi)
        for j in range(self.Np + 1):
            # default one-sided value at a jump node comes from the layer below;
            # the _hi tables use the layer above instead (identical elsewhere)
            lo, hi = self._layer_of_cell(min(max(j - 1, 0), self.Np - 1))
            node_idx[j], node_w[j] = pick(self.p[j], lo, hi)
            lo, hi = self._layer_of_cell(min(j, self.Np - 1))
            node_idx_hi[j], node_w_hi[j] = pick(self.p[j], lo, hi)
        object.__setattr__(self, "half_idx", half_idx)
        object.__setattr__(self, "half_w", half_w)
        object.__setattr__(self, "node_idx", node_idx)
        object.__setattr__(self, "node_w", node_w)
        object.__setattr__(self, "node_idx_hi", node_idx_hi)
        object.__setattr__(self, "node_w_hi", node_w_hi)
        object.__setattr__(self, "p_half", self.p[:-1] + 0.5 * dp)

    def _layer_of_cell(self, jc):
        edges = self._layer_edges
        for a, b in zip(edges[:-1], edges[1:]):
            if a <= jc < b:
                return a, b
        raise IndexError(jc)

    @property
    def jump_nodes(self):
        """p-node indices of the aligned vorticity breakpoints."""
        return tuple(self._layer_edges[1:-1])

    @property
    def n_reduced(self):
        """Columns of the even-reduced representation (q in [0, pi])."""
        return self.Nq // 2 + 1

    def qmirror(self, i):
        """Reflect a reduced q-index into the valid range [0, Nq/2]."""
        nh = self.Nq // 2
        i = abs(i)
        return 2 * nh - i if i > nh else i

    @property
    def i_q0(self):
        """Full-grid index of q = 0."""
        return self.Nq // 2

    def reduced_from_full(self, arr):
        """Restrict a full even array (Nq, ...) to reduced columns q in [0, pi]."""
        nh = self.Nq // 2
        return np.concatenate((arr[nh:], arr[:1]), axis=0)

    def full_from_reduced(self, red):
        """Mirror reduced columns (q in [0, pi]) to the full even q-grid."""
        nh = self.Nq // 2
        return red[np.abs(np.arange(self.Nq) - nh)]

    def mean_weights_reduced(self):
        """Trapezoid weights over one period for reduced surface columns."""
        nh = self.Nq // 2
        w = np.full(nh + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w / (2.0 * nh)

    def node_dp(self, hcols, upper=False):
        """Per-layer 4th-order p-derivative at all nodes; hcols (..., Np+1).

        `upper` switches the one-sided value at jump nodes to the layer above.
        """
        idx = self.node_idx_hi if upper else self.node_idx
        w = self.node_w_hi if upper else self.node_w
        return np.einsum("jt,...jt->...j", w, hcols[..., idx])

    def half_dp(self, hcols):
        """Per-layer 4th-order p-derivative at cell midpoints; hcols (..., Np+1)."""
        return np.einsum("jt,...jt->...j", self.half_w, hcols[..., self.half_idx])
