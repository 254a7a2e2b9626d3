"""Fast solvers for the separable constant-coefficient operators.

Uniform grids use sine/cosine transforms (the MAC stencils for each DOF
family are diagonalized exactly by DST-I / DST-II / DCT-II); graded tensor
grids use dense 1D generalized eigentransforms (fast diagonalization).
These serve as preconditioners for the variable-coefficient / penalized
operators and as direct solvers in the constant-coefficient case.

All operators are the integrated forms from operators.py.
"""

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

# per-axis 1D operator kinds
HALF = "half"        # cell-centred DOFs, Dirichlet value at the walls
NODE = "node"        # face DOFs, Dirichlet at the end faces (excluded)
NEUMANN = "neumann"  # cell-centred DOFs, zero-flux walls

FAMILIES = {
    "cell-dirichlet": (HALF, HALF, HALF),
    "cell-neumann": (NEUMANN, NEUMANN, NEUMANN),
    "face-0": (NODE, HALF, HALF),
    "face-1": (HALF, NODE, HALF),
    "face-2": (HALF, HALF, NODE),
}


def _dof_count(n, kind):
    return n - 1 if kind == NODE else n


def _uniform_theta(n, kind):
    if kind == HALF:
        return np.pi * (np.arange(n) + 1.0) / n
    if kind == NODE:
        return np.pi * (np.arange(n - 1) + 1.0) / n
    return np.pi * np.arange(n) / n  # neumann, includes 0


def _tridiag_1d(h, kind):
    """Integrated 1D stiffness T and weight diagonal M for one axis."""
    n = len(h)
    gaps = np.empty(n + 1)
    gaps[1:-1] = 0.5 * (h[:-1] + h[1:])
    gaps[0] = 0.5 * h[0]
    gaps[-1] = 0.5 * h[-1]
    if kind == NODE:
        m = _dof_count(n, kind)
        T = np.zeros((m, m))
        for j in range(m):
            T[j, j] = 1.0 / h[j] + 1.0 / h[j + 1]
            if j + 1 < m:
                T[j, j + 1] = T[j + 1, j] = -1.0 / h[j + 1]
        M = np.diag(gaps[1:-1])
        return T, M
    T = np.zeros((n, n))
    for f in range(1, n):
        c = 1.0 / gaps[f]
        T[f - 1, f - 1] += c
        T[f, f] += c
        T[f - 1, f] -= c
        T[f, f - 1] -= c
    if kind == HALF:
        T[0, 0] += 1.0 / gaps[0]
        T[-1, -1] += 1.0 / gaps[-1]
    return T, np.diag(h)


class FastDiagPoisson:
    """Solves (coeff * L + shift * Vol) x = b for the separable operator L
    of the given DOF family, where Vol is the diagonal of DOF volumes."""

    def __init__(self, grid, family, coeff=1.0):
        self.grid = grid
        self.family = family
        self.kinds = FAMILIES[family]
        self.coeff = float(coeff)
        hs = [grid.hx, grid.hy, grid.hz]
        self.uniform = grid.uniform
        self.lam = []
        if self.uniform:
            self.h = [float(h[0]) for h in hs]
            vol = self.h[0] * self.h[1] * self.h[2]
            self.dof_vol = vol
            for d, kind in enumerate(self.kinds):
                n = len(hs[d])
                theta = _uniform_theta(n, kind)
                trans = vol / (self.h[d] * self.h[d])
                self.lam.append(self.coeff * trans * (2.0 - 2.0 * np.cos(theta)))
        else:
            self.V = []
            self.Vt = []
            for d, kind in enumerate(self.kinds):
                T, M = _tridiag_1d(hs[d], kind)
                w, V = sla.eigh(T, M)
                if kind == NEUMANN:
                    w[np.abs(w) < 1e-12 * max(abs(w).max(), 1.0)] = 0.0
                self.lam.append(self.coeff * w)
                self.V.append(np.ascontiguousarray(V))
                self.Vt.append(np.ascontiguousarray(V.T))

    # --- transforms ---------------------------------------------------------
    def _fwd_uniform(self, b):
        x = b
        for d, kind in enumerate(self.kinds):
            if kind == NEUMANN:
                x = sfft.dct(x, type=2, axis=d, norm="ortho")
            elif kind == HALF:
                x = sfft.dst(x, type=2, axis=d, norm="ortho")
            else:
                x = sfft.dst(x, type=1, axis=d, norm="ortho")
        return x

    def _inv_uniform(self, x):
        for d, kind in enumerate(self.kinds):
            if kind == NEUMANN:
                x = sfft.idct(x, type=2, axis=d, norm="ortho")
            elif kind == HALF:
                x = sfft.idst(x, type=2, axis=d, norm="ortho")
            else:
                x = sfft.idst(x, type=1, axis=d, norm="ortho")
        return x

    @staticmethod
    def _apply_axes(mats, b):
        x = np.tensordot(mats[0], b, axes=(1, 0))
        x = np.tensordot(mats[1], x, axes=(1, 1)).transpose(1, 0, 2)
        x = np.tensordot(x, mats[2], axes=(2, 1))
        return x

    def solve(self, b, shift=0.0):
        """b is the integrated RHS on the family's interior DOFs."""
        lam = (self.lam[0][:, None, None] + self.lam[1][None, :, None]
               + self.lam[2][None, None, :])
        if self.uniform:
            x = self._fwd_uniform(b)
            den = lam + shift * self.dof_vol
            if self.family == "cell-neumann" and shift == 0.0:
                den = den.copy()
                den[0, 0, 0] = np.inf
            x = x / den
            return self._inv_uniform(x)
        x = self._apply_axes(self.Vt, b)
        den = lam + shift
        if self.family == "cell-neumann" and shift == 0.0:
            den = den.copy()
            den[np.abs(den) < 1e-14] = np.inf
        x = x / den
        return self._apply_axes(self.V, x)


class VelocityPrecond:
    """Per-component preconditioner for the viscous (strain- or
    Laplacian-form) solves: constant-coefficient fast inverse on the fluid
    DOFs, exact Jacobi on strongly penalized DOFs (where the penalization
    dominates the diagonal the two-sided restriction keeps the composite
    SPD and collapses the penalization outliers to a tight cluster).
    Operates on full face arrays (walls pinned to zero)."""

    def __init__(self, grid, coeff, shift=0.0, penal_dg=None, diag3=None,
                 penal_factor=4.0):
        self.grid = grid
        self.shift = float(shift)
        self.solvers = [FastDiagPoisson(grid, f"face-{d}", coeff) for d in range(3)]
        self.masks = None
        if penal_dg is not None and diag3 is not None:
            self.masks = []
            self.diags = []
            for d in range(3):
                base = diag3[d] - penal_dg[d]
                m = penal_dg[d] > penal_factor * np.abs(base)
                self.masks.append(m)
                self.diags.append(np.where(m, diag3[d], 1.0))

    def apply3(self, rx, ry, rz):
        outs = []
        for d, (s, r) in enumerate(zip(self.solvers, (rx, ry, rz))):
            r = np.asarray(r, dtype=np.float64)
            sl = [slice(None)] * 3
            sl[d] = slice(1, -1)
            if self.masks is not None:
                m = self.masks[d]
                rf = np.where(m, 0.0, r)
                full = np.zeros_like(r)
                full[tuple(sl)] = s.solve(rf[tuple(sl)], shift=self.shift)
                full[m] = 0.0
                full += np.where(m, r / self.diags[d], 0.0)
            else:
                full = np.zeros_like(r)
                full[tuple(sl)] = s.solve(r[tuple(sl)], shift=self.shift)
            outs.append(full)
        return tuple(outs)
