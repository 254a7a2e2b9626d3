"""Discrete MAC operators: divergence/gradient pair, variable-coefficient
Poisson operators (heat, pressure), the symmetric-gradient viscous operator,
and the CSR-backed SparseOperator.

Face-based systems are kept in integrated (energy) form, so every operator
here is symmetric under the plain euclidean dot and <A x, x> is the discrete
energy. The CSR assembly is an independent code path from the stencil
kernels and is used to cross-check them.
"""

import numpy as np
import scipy.sparse as sp

from .. import kernels
from .grid import face_shape


# ---------------------------------------------------------------------------
# divergence / gradient / averaging
# ---------------------------------------------------------------------------

def divergence(grid, ux, uy, uz, out=None):
    """Pointwise discrete divergence at cells."""
    if out is None:
        out = np.empty(grid.shape)
    np.subtract(ux[1:], ux[:-1], out=out)
    out /= grid.hx[:, None, None]
    out += (uy[:, 1:] - uy[:, :-1]) / grid.hy[None, :, None]
    out += (uz[:, :, 1:] - uz[:, :, :-1]) / grid.hz[None, None, :]
    return out


def gradient_integrated(grid, p):
    """Integrated pressure gradient on faces: area * (p_R - p_L); walls 0.

    Adjointness: sum_f (Gp)_f u_f = -sum_c vol_c p_c (div u)_c exactly.
    """
    hx, hy, hz = grid.hx, grid.hy, grid.hz
    gx = np.zeros(face_shape(grid, 0))
    gx[1:-1] = (p[1:] - p[:-1]) * (hy[:, None] * hz[None, :])
    gy = np.zeros(face_shape(grid, 1))
    gy[:, 1:-1] = (p[:, 1:] - p[:, :-1]) * (hx[:, None, None] * hz[None, None, :])
    gz = np.zeros(face_shape(grid, 2))
    gz[:, :, 1:-1] = (p[:, :, 1:] - p[:, :, :-1]) * (hx[:, None, None] * hy[None, :, None])
    return gx, gy, gz


def gradient_pointwise(grid, p):
    """(p_R - p_L) / gap on interior faces; walls 0."""
    gx = np.zeros(face_shape(grid, 0))
    gx[1:-1] = (p[1:] - p[:-1]) / grid.face_gaps(0)[1:-1, None, None]
    gy = np.zeros(face_shape(grid, 1))
    gy[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / grid.face_gaps(1)[None, 1:-1, None]
    gz = np.zeros(face_shape(grid, 2))
    gz[:, :, 1:-1] = (p[:, :, 1:] - p[:, :, :-1]) / grid.face_gaps(2)[None, None, 1:-1]
    return gx, gy, gz


def face_avg(q, axis):
    """Arithmetic cell-to-face average; one-sided copy at wall faces."""
    n = q.shape[axis]
    sl = [slice(None)] * 3
    out_shape = list(q.shape)
    out_shape[axis] += 1
    out = np.empty(tuple(out_shape))
    sl_in = [slice(None)] * 3

    sl[axis] = slice(1, n)
    sl_in[axis] = slice(0, n - 1)
    lo = q[tuple(sl_in)]
    sl_in[axis] = slice(1, n)
    hi = q[tuple(sl_in)]
    out[tuple(sl)] = 0.5 * (lo + hi)

    sl[axis] = 0
    sl_in[axis] = 0
    out[tuple(sl)] = q[tuple(sl_in)]
    sl[axis] = n
    sl_in[axis] = n - 1
    out[tuple(sl)] = q[tuple(sl_in)]
    return out


def face_harmonic(q, axis):
    """Harmonic cell-to-face average (flux-continuous for jumps); one-sided at walls."""
    n = q.shape[axis]
    sl = [slice(None)] * 3
    out_shape = list(q.shape)
    out_shape[axis] += 1
    out = np.empty(tuple(out_shape))
    sl_in = [slice(None)] * 3

    sl[axis] = slice(1, n)
    sl_in[axis] = slice(0, n - 1)
    lo = q[tuple(sl_in)]
    sl_in[axis] = slice(1, n)
    hi = q[tuple(sl_in)]
    out[tuple(sl)] = 2.0 * lo * hi / (lo + hi)

    sl[axis] = 0
    sl_in[axis] = 0
    out[tuple(sl)] = q[tuple(sl_in)]
    sl[axis] = n
    sl_in[axis] = n - 1
    out[tuple(sl)] = q[tuple(sl_in)]
    return out


def cell_avg(u, axis):
    """Face-to-cell average along the component's own axis."""
    sl_lo = [slice(None)] * 3
    sl_hi = [slice(None)] * 3
    sl_lo[axis] = slice(0, -1)
    sl_hi[axis] = slice(1, None)
    return 0.5 * (u[tuple(sl_lo)] + u[tuple(sl_hi)])


def edge_mu(mu_cell, a, b):
    """mu averaged to the (a,b) edge family (4 adjacent cells; 2 at walls,
    1 at corners), via two successive face averages."""
    return face_avg(face_avg(mu_cell, a), b)


# ---------------------------------------------------------------------------
# cell-to-face transfer pair for the buoyancy/heat coupling
# ---------------------------------------------------------------------------

class CellFaceTransfer:
    """Adjoint pair between cell scalars and face vectors through a fixed
    face vector field gF (the potential gradient).

    to_faces(theta)  = integrated force: w_f * gF_f * avg(theta)   (interior faces)
    to_cells(u)      = vol-weighted adjoint, so that
        sum_f to_faces(theta)_f u_f == sum_c vol_c theta_c to_cells(u)_c  exactly.
    """

    def __init__(self, grid, gfx, gfy, gfz):
        self.grid = grid
        self.gw = []
        for axis, gf in enumerate((gfx, gfy, gfz)):
            w = grid.face_volumes(axis) * gf
            # wall faces never contribute (u=0 there); zero them for symmetry
            sl = [slice(None)] * 3
            sl[axis] = 0
            w[tuple(sl)] = 0.0
            sl[axis] = -1
            w[tuple(sl)] = 0.0
            self.gw.append(w)

    def to_faces(self, theta, sign=1.0):
        out = []
        for axis, w in enumerate(self.gw):
            g = np.zeros_like(w)
            sl = [slice(None)] * 3
            sl[axis] = slice(1, -1)
            sl_lo = [slice(None)] * 3
            sl_lo[axis] = slice(0, -1)
            sl_hi = [slice(None)] * 3
            sl_hi[axis] = slice(1, None)
            g[tuple(sl)] = 0.5 * (theta[tuple(sl_lo)] + theta[tuple(sl_hi)])
            g *= w
            if sign != 1.0:
                g *= sign
            out.append(g)
        return out

    def to_cells(self, ux, uy, uz):
        """Adjoint transfer, divided by cell volume (a plain cell field)."""
        grid = self.grid
        acc = np.zeros(grid.shape)
        for axis, (w, u) in enumerate(zip(self.gw, (ux, uy, uz))):
            f = w * u
            sl_int = [slice(None)] * 3
            sl_int[axis] = slice(1, -1)
            half = 0.5 * f[tuple(sl_int)]
            sl_lo = [slice(None)] * 3
            sl_lo[axis] = slice(0, -1)
            sl_hi = [slice(None)] * 3
            sl_hi[axis] = slice(1, None)
            acc[tuple(sl_lo)] += half
            acc[tuple(sl_hi)] += half
        vols = np.einsum("i,j,k->ijk", grid.hx, grid.hy, grid.hz)
        return acc / vols


# ---------------------------------------------------------------------------
# variable-coefficient cell Poisson (heat / pressure projection)
# ---------------------------------------------------------------------------

class CellPoissonOp:
    """Integrated-form SPD operator sum_f cf_f (x_c - x_nb) + dg*x on cells."""

    def __init__(self, cfx, cfy, cfz, dg):
        self.cfx, self.cfy, self.cfz = cfx, cfy, cfz
        self.dg = dg
        self.shape3 = dg.shape
        self._out = np.empty(self.shape3)

    def matvec(self, x):
        return kernels.apply_poisson7(self._out, np.ascontiguousarray(x, dtype=np.float64),
                                      self.cfx, self.cfy, self.cfz, self.dg).copy()

    def diagonal(self):
        return (self.cfx[:-1] + self.cfx[1:] + self.cfy[:, :-1] + self.cfy[:, 1:]
                + self.cfz[:, :, :-1] + self.cfz[:, :, 1:] + self.dg)

    def energy(self, x):
        return float(np.vdot(x, self.matvec(x)).real)

    def to_sparse(self):
        return SparseOperator(assemble_poisson_csr(self.cfx, self.cfy, self.cfz, self.dg),
                              symmetric=True)


def heat_coefficients(grid, kappa_cell, dirichlet=True):
    """Face conductances kappa_face * area / gap with harmonic averaging;
    homogeneous Dirichlet enters through the half-cell wall gap."""
    cfs = []
    for axis in range(3):
        kf = face_harmonic(kappa_cell, axis)
        gaps = grid.face_gaps(axis)
        wx, wy, wz = grid.face_axis_weights(axis)
        area = [wx, wy, wz]
        area[axis] = 1.0 / gaps
        cf = kf * np.einsum("i,j,k->ijk", *[np.atleast_1d(a) for a in area])
        if not dirichlet:
            sl = [slice(None)] * 3
            sl[axis] = 0
            cf[tuple(sl)] = 0.0
            sl[axis] = -1
            cf[tuple(sl)] = 0.0
        cfs.append(cf)
    return cfs


def heat_operator(grid, kappa_cell, dirichlet=True, shift=None):
    cfx, cfy, cfz = heat_coefficients(grid, kappa_cell, dirichlet)
    dg = np.zeros(grid.shape) if shift is None else shift
    return CellPoissonOp(cfx, cfy, cfz, dg)


def pressure_operator(grid, rho_faces):
    """SPD operator for the (optionally rho-weighted) pressure projection:
    cf = area / (rho_f * gap); pure Neumann (zero wall coefficients)."""
    cfs = []
    for axis in range(3):
        gaps = grid.face_gaps(axis)
        wx, wy, wz = grid.face_axis_weights(axis)
        area = [wx, wy, wz]
        area[axis] = 1.0 / gaps
        cf = np.einsum("i,j,k->ijk", *[np.atleast_1d(a) for a in area])
        if rho_faces is not None:
            cf = cf / rho_faces[axis]
        sl = [slice(None)] * 3
        sl[axis] = 0
        cf[tuple(sl)] = 0.0
        sl[axis] = -1
        cf[tuple(sl)] = 0.0
        cfs.append(cf)
    return CellPoissonOp(cfs[0], cfs[1], cfs[2], np.zeros(grid.shape))


# ---------------------------------------------------------------------------
# symmetric-gradient viscous operator on face velocities
# ---------------------------------------------------------------------------

class ViscousOp:
    """Block operator on (ux, uy, uz):

        <A u, u> = int mu/2 |grad u + grad u^T|^2 + sum_f dg_f u_f^2

    dg carries penalization sigma*w, the time-stepping mass rho*w/dt and the
    cell-averaged Brinkman friction is added separately (see BrinkmanTerm).
    """

    def __init__(self, grid, mu_cell, dgx=None, dgy=None, dgz=None):
        self.grid = grid
        vols = np.einsum("i,j,k->ijk", grid.hx, grid.hy, grid.hz)
        self.ac = np.ascontiguousarray(2.0 * mu_cell * vols)
        self.e = []
        pairs = ((0, 1), (0, 2), (1, 2))
        for (a, b) in pairs:
            mu_e = edge_mu(mu_cell, a, b)
            ws = [grid.hx, grid.hy, grid.hz]
            ws[a] = grid.face_gaps(a)
            ws[b] = grid.face_gaps(b)
            vole = np.einsum("i,j,k->ijk", *ws)
            self.e.append(np.ascontiguousarray(mu_e * vole))
        z = lambda axis: np.zeros(face_shape(grid, axis))
        self.dg = [np.ascontiguousarray(dgx) if dgx is not None else z(0),
                   np.ascontiguousarray(dgy) if dgy is not None else z(1),
                   np.ascontiguousarray(dgz) if dgz is not None else z(2)]
        self._out = [np.empty(face_shape(grid, d)) for d in range(3)]

    def matvec3(self, ux, uy, uz):
        ox, oy, oz = kernels.apply_viscous_strain(
            self._out[0], self._out[1], self._out[2],
            np.ascontiguousarray(ux, dtype=np.float64),
            np.ascontiguousarray(uy, dtype=np.float64),
            np.ascontiguousarray(uz, dtype=np.float64),
            self.ac, self.e[0], self.e[1], self.e[2],
            self.dg[0], self.dg[1], self.dg[2],
            self.grid.hx, self.grid.hy, self.grid.hz,
            self.grid.face_gaps(0), self.grid.face_gaps(1), self.grid.face_gaps(2))
        return ox.copy(), oy.copy(), oz.copy()

    def diagonal3(self):
        """Diagonal of the block operator (wall faces set to 1)."""
        g = self.grid
        hx, hy, hz = g.hx, g.hy, g.hz
        dxc, dyc, dzc = g.face_gaps(0), g.face_gaps(1), g.face_gaps(2)
        ac, (exy, exz, eyz) = self.ac, self.e

        dx_ = self.dg[0].copy()
        dx_[1:-1] += (ac[:-1] / hx[:-1, None, None] ** 2 + ac[1:] / hx[1:, None, None] ** 2)
        dx_ += exy[:, :-1] / dyc[None, :-1, None] ** 2 + exy[:, 1:] / dyc[None, 1:, None] ** 2
        dx_ += exz[:, :, :-1] / dzc[None, None, :-1] ** 2 + exz[:, :, 1:] / dzc[None, None, 1:] ** 2
        dx_[0] = 1.0
        dx_[-1] = 1.0

        dy_ = self.dg[1].copy()
        dy_[:, 1:-1] += (ac[:, :-1] / hy[None, :-1, None] ** 2 + ac[:, 1:] / hy[None, 1:, None] ** 2)
        dy_ += exy[:-1] / dxc[:-1, None, None] ** 2 + exy[1:] / dxc[1:, None, None] ** 2
        dy_ += eyz[:, :, :-1] / dzc[None, None, :-1] ** 2 + eyz[:, :, 1:] / dzc[None, None, 1:] ** 2
        dy_[:, 0] = 1.0
        dy_[:, -1] = 1.0

        dz_ = self.dg[2].copy()
        dz_[:, :, 1:-1] += (ac[:, :, :-1] / hz[None, None, :-1] ** 2 + ac[:, :, 1:] / hz[None, None, 1:] ** 2)
        dz_ += exz[:-1] / dxc[:-1, None, None] ** 2 + exz[1:] / dxc[1:, None, None] ** 2
        dz_ += eyz[:, :-1] / dyc[None, :-1, None] ** 2 + eyz[:, 1:] / dyc[None, 1:, None] ** 2
        dz_[:, :, 0] = 1.0
        dz_[:, :, -1] = 1.0
        return [dx_, dy_, dz_]

    def strain_energy(self, ux, uy, uz):
        """int mu/2 |grad u + grad u^T|^2 (no diagonal terms)."""
        from .._kernels_py import strain_fields
        g = self.grid
        sxx, syy, szz, gxy, gxz, gyz = strain_fields(
            ux, uy, uz, g.hx, g.hy, g.hz,
            g.face_gaps(0), g.face_gaps(1), g.face_gaps(2))
        e = float(np.vdot(self.ac, sxx * sxx + syy * syy + szz * szz).real)
        e += float(np.vdot(self.e[0], gxy * gxy).real)
        e += float(np.vdot(self.e[1], gxz * gxz).real)
        e += float(np.vdot(self.e[2], gyz * gyz).real)
        return e


def component_laplacian_coeffs(grid, axis, mu=1.0):
    """Face conductances for the plain Laplacian acting on the interior DOFs
    of one velocity component (Dirichlet energy mu int |grad u_axis|^2).

    The interior view excludes the two wall faces; ghost values outside
    tangential walls sit at the half-cell gap, so Dirichlet walls come out
    as diagonal-only boundary conductances.
    """
    hs = [grid.hx, grid.hy, grid.hz]
    gaps = [grid.face_gaps(d) for d in range(3)]
    cfs = []
    for d in range(3):
        ws = []
        for e in range(3):
            if e == d:
                w = 1.0 / (hs[e] if d == axis else gaps[e])
            elif e == axis:
                w = gaps[e][1:-1]
            else:
                w = hs[e]
            ws.append(np.atleast_1d(w))
        cfs.append(np.ascontiguousarray(float(mu) * np.einsum("i,j,k->ijk", *ws)))
    return cfs


class ComponentLaplacianOp:
    """Componentwise vector Laplacian (plain Dirichlet energy), used by the
    obstacle cell problem. Acts on full face arrays; wall faces stay zero."""

    def __init__(self, grid, mu=1.0, dgs=None):
        self.grid = grid
        self.ops = []
        for axis in range(3):
            cfx, cfy, cfz = component_laplacian_coeffs(grid, axis, mu)
            shp = list(grid.shape)
            shp[axis] -= 1
            dg = np.zeros(tuple(shp)) if dgs is None else np.ascontiguousarray(dgs[axis])
            self.ops.append(CellPoissonOp(cfx, cfy, cfz, dg))

    def interior(self, u, axis):
        sl = [slice(None)] * 3
        sl[axis] = slice(1, -1)
        return u[tuple(sl)]

    def diagonal3(self):
        outs = []
        for axis, op in enumerate(self.ops):
            shp = list(self.grid.shape)
            shp[axis] += 1
            full = np.ones(tuple(shp))
            self.interior(full, axis)[...] = op.diagonal()
            outs.append(full)
        return outs

    def matvec3(self, ux, uy, uz):
        outs = []
        for axis, u in enumerate((ux, uy, uz)):
            full = np.zeros_like(u)
            self.interior(full, axis)[...] = self.ops[axis].matvec(
                np.ascontiguousarray(self.interior(u, axis)))
            outs.append(full)
        return outs[0], outs[1], outs[2]


# ---------------------------------------------------------------------------
# SparseOperator (CSR) and the independent assembly used to validate kernels
# ---------------------------------------------------------------------------

class SparseOperator:
    """Row-compressed sparse matrix with a symmetry flag."""

    def __init__(self, mat, symmetric=False):
        self.mat = mat.tocsr()
        self.symmetric = symmetric

    @property
    def shape(self):
        return self.mat.shape

    def matvec(self, x):
        return self.mat @ x

    def diagonal(self):
        return self.mat.diagonal()

    def check_symmetry(self, nsamples=200, rng=None, rtol=1e-12):
        """Spot-check A[i,j] == A[j,i] on random entry pairs."""
        if not self.symmetric:
            return True
        rng = np.random.default_rng(0) if rng is None else rng
        n = self.shape[0]
        scale = max(abs(self.mat.data).max(), 1e-300)
        for _ in range(nsamples):
            i = int(rng.integers(n))
            row = self.mat.getrow(i)
            for j, v in zip(row.indices, row.data):
                vt = self.mat[j, i]
                if abs(v - vt) > rtol * scale:
                    return False
        return True


def assemble_poisson_csr(cfx, cfy, cfz, dg):
    """Independent COO/CSR assembly of the 7-point operator (cross-checks
    the stencil kernels)."""
    a, b, c = dg.shape
    n = a * b * c

    def lin(i, j, k):
        return (i * b + j) * c + k

    idx = np.arange(n).reshape(a, b, c)
    diag = (cfx[:-1] + cfx[1:] + cfy[:, :-1] + cfy[:, 1:]
            + cfz[:, :, :-1] + cfz[:, :, 1:] + dg).ravel()
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag]
    for axis, cf in ((0, cfx), (1, cfy), (2, cfz)):
        sl_int = [slice(None)] * 3
        sl_int[axis] = slice(1, -1)
        cf_int = cf[tuple(sl_int)]
        sl_lo = [slice(None)] * 3
        sl_lo[axis] = slice(0, -1)
        sl_hi = [slice(None)] * 3
        sl_hi[axis] = slice(1, None)
        lo = idx[tuple(sl_lo)].ravel()
        hi = idx[tuple(sl_hi)].ravel()
        v = -cf_int.ravel()
        rows += [lo, hi]
        cols += [hi, lo]
        vals += [v, v]
    mat = sp.coo_matrix((np.concatenate(vals),
                         (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n))
    return mat.tocsr()
