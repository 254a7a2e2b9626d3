"""Krylov solvers: preconditioned CG (with curvature diagnostics), the
pressure-Schur (Uzawa) Stokes solver with a MINRES fallback, and the
discrete divergence-free projection.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import face_shape
from .operators import (CellPoissonOp, ViscousOp, divergence,
                        gradient_integrated, gradient_pointwise,
                        pressure_operator)
from .transforms import FastDiagPoisson, VelocityPrecond


class SolverError(RuntimeError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history) if history is not None else []


class IndefiniteOperatorError(SolverError):
    pass


# --- tuple-of-arrays vector helpers (no copies, in-place updates) -----------

def _as_tuple(x):
    return x if isinstance(x, tuple) else (x,)


def tdot(a, b):
    return sum(float(np.vdot(x, y).real) for x, y in zip(a, b))


def taxpy(alpha, x, y):
    for xi, yi in zip(x, y):
        yi += alpha * xi


def txpay(x, beta, y):
    """y <- x + beta*y (in place on y)."""
    for xi, yi in zip(x, y):
        yi *= beta
        yi += xi


def tcopy(x):
    return tuple(a.copy() for a in x)


def tzeros_like(x):
    return tuple(np.zeros_like(a) for a in x)


def pcg(matvec, b, x0=None, M=None, tol=1e-10, maxit=1000, dot=None,
        check_curvature=True):
    """Preconditioned CG on tuples of ndarrays.

    Returns (x, info) with info = {iterations, residuals, converged}.
    Indefiniteness (non-positive curvature) raises IndefiniteOperatorError.
    """
    b = _as_tuple(b)
    dot = dot or tdot
    x = tzeros_like(b) if x0 is None else tcopy(_as_tuple(x0))
    r = tcopy(b)
    if x0 is not None:
        ax = _as_tuple(matvec(*x))
        taxpy(-1.0, ax, r)
    z = tcopy(_as_tuple(M(*r))) if M is not None else tcopy(r)
    d = tcopy(z)
    rz = dot(r, z)
    rnorm0 = np.sqrt(max(dot(b, b), 0.0))
    hist = [np.sqrt(max(dot(r, r), 0.0))]
    if rnorm0 == 0.0:
        return tzeros_like(b), {"iterations": 0, "residuals": hist, "converged": True}
    if hist[0] <= tol * rnorm0:
        return x, {"iterations": 0, "residuals": hist, "converged": True}
    for it in range(1, maxit + 1):
        ad = _as_tuple(matvec(*d))
        dad = dot(d, ad)
        if check_curvature and dad <= 0.0:
            raise IndefiniteOperatorError(
                f"non-positive curvature p^T A p = {dad:.3e} at iteration {it}",
                history=hist)
        alpha = rz / dad
        taxpy(alpha, d, x)
        taxpy(-alpha, ad, r)
        rn = np.sqrt(max(dot(r, r), 0.0))
        hist.append(rn)
        if rn <= tol * rnorm0:
            return x, {"iterations": it, "residuals": hist, "converged": True}
        if M is not None:
            z = tcopy(_as_tuple(M(*r)))
        else:
            z = r
        rz_new = dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        txpay(z, beta, d)
    return x, {"iterations": maxit, "residuals": hist, "converged": False}


def solve_spd(A, b, tol=1e-10, maxit=2000, M=None, x0=None):
    """CG for a symmetric positive (semi)definite operator.

    A may be a SparseOperator, a scipy sparse matrix, an ndarray, or any
    object with .matvec. Jacobi preconditioning is used when a diagonal is
    available and M is not given. Raises SolverError on non-convergence and
    IndefiniteOperatorError when negative curvature is detected.
    """
    if hasattr(A, "matvec"):
        mv = A.matvec
        diag = A.diagonal() if hasattr(A, "diagonal") else None
    elif sp.issparse(A):
        mv = lambda x: A @ x
        diag = A.diagonal()
    else:
        arr = np.asarray(A)
        mv = lambda x: arr @ x
        diag = np.diagonal(arr).copy()
    if M is None and diag is not None:
        dpos = np.where(np.abs(diag) > 0, diag, 1.0)
        M = lambda r: r / dpos
    x, info = pcg(lambda v: mv(v), b, x0=x0,
                  M=(lambda r: M(r)) if M is not None else None,
                  tol=tol, maxit=maxit)
    if not info["converged"]:
        raise SolverError(
            f"CG did not converge in {maxit} iterations "
            f"(rel. residual {info['residuals'][-1] / max(info['residuals'][0], 1e-300):.3e})",
            history=info["residuals"])
    return x[0], info


# --- divergence-free projection ---------------------------------------------

def project_div_free(grid, ux, uy, uz, rho_faces=None, tol=1e-12, maxit=4000,
                     precond=None, x0=None):
    """Project a face velocity onto the discretely divergence-free subspace
    (rho-weighted when rho_faces is given): u' = u - grad(phi)/rho.

    Returns (u', phi, info). The projection is orthogonal in the
    (rho-weighted) face inner product, so it never increases the kinetic
    energy.
    """
    pop = pressure_operator(grid, rho_faces)
    vols = np.einsum("i,j,k->ijk", grid.hx, grid.hy, grid.hz)
    div = divergence(grid, ux, uy, uz)
    rhs = -vols * div
    rhs -= rhs.mean()
    if precond is None:
        coeff = 1.0
        if rho_faces is not None:
            coeff = 1.0 / float(np.mean([r.mean() for r in rho_faces]))
        precond = FastDiagPoisson(grid, "cell-neumann", coeff=coeff)

    def M(r):
        z = precond.solve(r)
        return z - z.mean()

    phi, info = pcg(lambda p: pop.matvec(p), rhs, M=M, tol=tol, maxit=maxit, x0=x0)
    phi = phi[0] - phi[0].mean()
    gx, gy, gz = gradient_pointwise(grid, phi)
    if rho_faces is not None:
        gx = gx / rho_faces[0]
        gy = gy / rho_faces[1]
        gz = gz / rho_faces[2]
    return (ux - gx, uy - gy, uz - gz), phi, info


# --- Stokes saddle point -----------------------------------------------------

class StokesResult:
    def __init__(self, u, p, info):
        self.u = u
        self.p = p
        self.info = info


def _vol_dot(grid):
    hx, hy, hz = grid.hx, grid.hy, grid.hz

    def dot(a, b):
        return float(np.einsum("ijk,ijk,i,j,k->", a[0], b[0], hx, hy, hz))

    return dot


def stokes_solve(grid, mu_cell, f, sigma_dg=None, extra_op=None, mass_dg=None,
                 *, operator=None, tol_div=1e-8, inner_tol=1e-11,
                 max_outer=400, precond=None, u0=None, p0=None, p_active=None,
                 div_scale=None):
    """Steady Stokes / Brinkman saddle-point solve on the penalized MAC grid.

    Solves  A u + G p = f,  div u = 0,  where A is the symmetric-gradient
    viscous operator with diagonal penalization/mass terms (sigma_dg/mass_dg,
    integrated form) plus an optional extra SPD block (Brinkman friction).
    Pressure-Schur CG (Uzawa) with fast-diagonalization-preconditioned inner
    CG; falls back to MINRES on the full KKT system if the outer iteration
    stagnates. Returns StokesResult with mean-zero pressure.

    p_active restricts the divergence constraint to the flagged cells:
    inside deeply penalized regions the velocity is pinned by the
    penalization itself and the corresponding pressures are decoupled
    near-null Schur modes, so excluding them keeps the Schur iteration
    well-conditioned. The divergence on inactive cells is the penalization
    leakage, reported separately in the result info.
    """
    dgs = []
    for d in range(3):
        dg = np.zeros(face_shape(grid, d))
        if sigma_dg is not None:
            dg += sigma_dg[d]
        if mass_dg is not None:
            dg += mass_dg[d]
        dgs.append(dg)
    A = operator if operator is not None else ViscousOp(grid, mu_cell, *dgs)

    if extra_op is None:
        matvec = A.matvec3
    else:
        def matvec(ux, uy, uz):
            ox, oy, oz = A.matvec3(ux, uy, uz)
            ex, ey, ez = extra_op(ux, uy, uz)
            return ox + ex, oy + ey, oz + ez

    if precond is None:
        mu_hat = float(np.mean(mu_cell)) if not np.isscalar(mu_cell) else float(mu_cell)
        shift = 0.0
        if mass_dg is not None:
            vol = grid.cell_volumes().mean()
            shift = float(np.mean([m.mean() for m in mass_dg])) / vol
        penal = sigma_dg
        diag3 = A.diagonal3() if (penal is not None and hasattr(A, "diagonal3")) else None
        precond = VelocityPrecond(grid, 1.35 * mu_hat, shift=shift,
                                  penal_dg=penal, diag3=diag3)

    inner_its = []

    def inner_solve(rhs, x0=None):
        x, info = pcg(matvec, rhs, x0=x0, M=precond.apply3,
                      tol=inner_tol, maxit=2000)
        inner_its.append(info["iterations"])
        if not info["converged"]:
            raise SolverError("inner viscous solve stalled", info["residuals"])
        return x

    act = None
    if p_active is not None and not p_active.all():
        act = p_active.astype(float)

    def pres_residual(u3):
        r = -divergence(grid, *u3)
        if act is not None:
            r *= act
        return (r,)

    dot = _vol_dot(grid)
    if p0 is not None:
        g0 = gradient_integrated(grid, p0)
        rhs0 = tuple(fc - gc for fc, gc in zip(f, g0))
        u = inner_solve(rhs0, x0=u0)
        p = p0.copy()
    else:
        u = inner_solve(f, x0=u0)
        p = np.zeros(grid.shape)
    r = pres_residual(u)
    rhs_norm = np.sqrt(max(dot(r, r), 0.0))
    scale = rhs_norm if div_scale is None else float(div_scale)
    hist = [rhs_norm]

    def finish(it, method):
        p_out = p - grid.integrate_cells(p) / np.prod(grid.extent)
        div = divergence(grid, *u)
        leak = 0.0
        if act is not None:
            leak = float(np.abs(div[p_active == False]).max()) if (~p_active).any() else 0.0
        return StokesResult(u, p_out, {
            "outer_iterations": it, "residuals": hist,
            "inner_iterations": inner_its, "method": method,
            "div_active": float(np.abs(div if act is None else div * act).max()),
            "div_leakage": leak})

    if rhs_norm == 0.0 or rhs_norm <= tol_div * scale:
        return finish(0, "uzawa")
    z = tcopy(r)
    d = tcopy(z)
    rz = dot(r, z)
    v_warm = None
    stagnated = False
    for it in range(1, max_outer + 1):
        g = gradient_integrated(grid, d[0])
        v = inner_solve(g, x0=v_warm)
        v_warm = tcopy(v)
        sd = pres_residual(v)
        dad = dot(d, sd)
        if dad <= 0.0:
            stagnated = True
            break
        alpha = rz / dad
        p += alpha * d[0]
        taxpy(-alpha, v, u)
        taxpy(-alpha, sd, r)
        rn = np.sqrt(max(dot(r, r), 0.0))
        hist.append(rn)
        if rn <= tol_div * scale:
            return finish(it, "uzawa")
        if it >= 30 and hist[-1] > 0.995 * hist[-15]:
            stagnated = True
            break
        z = tcopy(r)
        rz_new = dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        txpay(z, beta, d)
    if not stagnated:
        stagnated = True  # out of iterations; try the monolithic fallback

    u, p, minres_info = _stokes_minres(grid, matvec, f, precond,
                                       tol_div, u, p)
    hist.append(minres_info["final_div"])
    res = finish(len(hist) - 1, "uzawa+minres")
    res.info.update(minres_info)
    return res


def _stokes_minres(grid, matvec, f, precond, tol, u_init, p_init):
    """Monolithic MINRES on the KKT system with a block-diagonal
    preconditioner (constant-coefficient viscous inverse + pressure mass)."""
    shp = [face_shape(grid, d) for d in range(3)]
    sizes = [int(np.prod(s)) for s in shp] + [int(np.prod(grid.shape))]
    offs = np.cumsum([0] + sizes)
    vols = np.einsum("i,j,k->ijk", grid.hx, grid.hy, grid.hz)

    def split(x):
        parts = [x[offs[i]:offs[i + 1]] for i in range(4)]
        return ([parts[d].reshape(shp[d]) for d in range(3)],
                parts[3].reshape(grid.shape))

    def kkt(x):
        u3, p = split(x)
        au = matvec(*u3)
        g = gradient_integrated(grid, p)
        top = [au[d] + g[d] for d in range(3)]
        # second block row: vol * div u (so the KKT matrix is symmetric)
        bot = vols * divergence(grid, *u3)
        return np.concatenate([t.ravel() for t in top] + [bot.ravel()])

    def prec(x):
        u3, p = split(x)
        pu = precond.apply3(*u3)
        return np.concatenate([t.ravel() for t in pu] + [(p * vols).ravel()])

    n = offs[-1]
    K = spla.LinearOperator((n, n), matvec=kkt)
    M = spla.LinearOperator((n, n), matvec=prec)
    rhs = np.concatenate([fc.ravel() for fc in f] + [np.zeros(sizes[3])])
    x0 = np.concatenate([uc.ravel() for uc in u_init] + [p_init.ravel()])
    x, _ = spla.minres(K, rhs, x0=x0, M=M, rtol=min(tol, 1e-10), maxiter=5000)
    u3, p = split(x)
    u3 = [c.copy() for c in u3]
    p = p - grid.integrate_cells(p) / np.prod(grid.extent)
    div = divergence(grid, *u3)
    final_div = np.sqrt(grid.dot_cells(div, div))
    return tuple(u3), p, {"final_div": final_div}
