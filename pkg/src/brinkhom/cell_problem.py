"""Obstacle cell problem: Stokes flow in the punctured unit ball with unit
boundary data on the obstacle, solved on a graded Cartesian grid with
volume penalization of the obstacle and of the exterior of the ball.
Produces per-obstacle drag matrices and decay diagnostics.
"""

import os
from dataclasses import dataclass

import numpy as np

from .geometry import HoleShape
from .numerics.grid import StaggeredGrid, face_shape
from .numerics.operators import ComponentLaplacianOp, divergence
from .numerics.solvers import SolverError, stokes_solve
from .numerics.transforms import VelocityPrecond

BALL_RADIUS = 1.0
BOX_HALF = 1.08          # walls sit inside the penalized exterior
PENAL = 1.0e6            # sigma = PENAL * mu / h_loc^2  (eta = 1e-6 h^2/mu)


class CacheMissError(KeyError):
    pass


class NestingError(ValueError):
    pass


def cell_grid(s, resolution=128, fine_factor=3.0):
    """Graded grid on [-BOX_HALF, BOX_HALF]^3 whose near-obstacle spacing is
    fine_factor x finer than a uniform `resolution`^3 grid (the 'effective'
    resolution); cell count is 3/4 of `resolution` per axis."""
    n = max(32, int(round(resolution * 3 / 4)))
    target = (2.0 * BOX_HALF / resolution) / fine_factor
    lo, hi = 0.3, 8.0
    for _ in range(60):
        beta = 0.5 * (lo + hi)
        hmin = (2.0 * BOX_HALF / n) * beta / np.sinh(beta)
        if hmin > target:
            lo = beta
        else:
            hi = beta
    beta = 0.5 * (lo + hi)
    return StaggeredGrid.box((-BOX_HALF,) * 3, (BOX_HALF,) * 3, (n, n, n),
                             stretch=(beta, beta, beta))


def _region_face_fractions(grid, inside_fn, nsub=3):
    """Solid fraction of every face of each family under inside_fn,
    by stratified transverse subsampling."""
    fracs = []
    for d in range(3):
        coords = [grid.cell_coords(e) for e in range(3)]
        coords[d] = grid.face_coords(d)
        t1, t2 = [e for e in range(3) if e != d]
        h1 = grid.h_of(t1)
        h2 = grid.h_of(t2)
        acc = np.zeros(face_shape(grid, d))
        for a in range(nsub):
            for b in range(nsub):
                o1 = ((a + 0.5) / nsub - 0.5) * h1
                o2 = ((b + 0.5) / nsub - 0.5) * h2
                cs = [None] * 3
                cs[d] = coords[d]
                cs[t1] = coords[t1] + o1
                cs[t2] = coords[t2] + o2
                X, Y, Z = np.ix_(cs[0], cs[1], cs[2])
                acc += inside_fn(X, Y, Z)
        fracs.append(acc / (nsub * nsub))
    return fracs


def _support_on_mesh(shape, X, Y, Z):
    r = np.sqrt(X * X + Y * Y + Z * Z)
    safe = np.where(r > 0, r, 1.0)
    shp = np.broadcast_shapes(X.shape, Y.shape, Z.shape)
    dirs = np.empty(shp + (3,))
    dirs[..., 0] = X / safe
    dirs[..., 1] = Y / safe
    dirs[..., 2] = Z / safe
    R = shape.support_radius(dirs.reshape(-1, 3)).reshape(shp)
    return R


@dataclass
class CellSolution:
    """Velocity/pressure fields (one triple per direction i=0,1,2) on the
    graded cell grid, with the penalization masks used to produce them."""

    grid: StaggeredGrid
    shape: HoleShape
    s: float
    resolution: int
    v: list          # three (ux, uy, uz) tuples
    q: list          # three pressure arrays
    obstacle_frac: tuple
    exterior_frac: tuple
    info: list

    def operator_energies(self):
        """Dirichlet energies <A v, v> from the Laplacian operator path
        (independent quadrature from the Gram assembly)."""
        lap = ComponentLaplacianOp(self.grid, 1.0)
        out = []
        for u in self.v:
            av = lap.matvec3(*u)
            out.append(sum(float(np.vdot(a, b).real) for a, b in zip(av, u)))
        return out

    def divergence_max(self):
        return max(float(np.abs(divergence(self.grid, *u)).max()) for u in self.v)

    def boundary_residuals(self):
        """Max deviation of v^i from e^i deep inside the obstacle and from 0
        deep outside the unit ball (interface faces excluded)."""
        res_obstacle = 0.0
        res_exterior = 0.0
        for i, u in enumerate(self.v):
            for d in range(3):
                deep_o = self.obstacle_frac[d] >= 1.0
                deep_e = self.exterior_frac[d] >= 1.0
                target = 1.0 if d == i else 0.0
                if deep_o.any():
                    res_obstacle = max(res_obstacle, float(np.abs(u[d][deep_o] - target).max()))
                if deep_e.any():
                    res_exterior = max(res_exterior, float(np.abs(u[d][deep_e]).max()))
        return res_obstacle, res_exterior


def solve_cell_problem(shape, s, resolution=128, tol_div=1e-8, inner_tol=1e-11,
                       fine_factor=3.0):
    """Solve the three unit-ball obstacle problems (boundary data e^i on the
    obstacle K = s*shape, zero on the unit sphere).

    The discrete velocity minimizes the Dirichlet integral subject to the
    divergence constraint, with the boundary data imposed by volume
    penalization weighted by face solid fractions.
    """
    if not 0.0 < s <= 0.5:
        raise ValueError("obstacle scale s must be in (0, 1/2]")
    rmax = s * shape.max_radius()
    if rmax >= 0.75 * s / 0.75:  # shape invariant guarantees < (3/4); keep a hard stop
        if rmax >= 0.999:
            raise ValueError("obstacle reaches the unit sphere")
    grid = cell_grid(s, resolution, fine_factor)

    def in_obstacle(X, Y, Z):
        R = _support_on_mesh(shape, X / s, Y / s, Z / s)
        r = np.sqrt(X * X + Y * Y + Z * Z) / s
        return (r <= R).astype(float)

    def in_exterior(X, Y, Z):
        return (np.sqrt(X * X + Y * Y + Z * Z) >= BALL_RADIUS).astype(float)

    frac_o = _region_face_fractions(grid, in_obstacle)
    frac_e = _region_face_fractions(grid, in_exterior)

    dgs = []
    dg_full3 = []
    rhs_scale = []
    for d in range(3):
        w = grid.face_volumes(d)
        hloc2 = w ** (2.0 / 3.0)
        sig = PENAL / hloc2 * w
        dg_full = sig * (frac_o[d] + frac_e[d])
        sl = [slice(None)] * 3
        sl[d] = slice(1, -1)
        dgs.append(np.ascontiguousarray(dg_full[tuple(sl)]))
        dg_full3.append(dg_full)
        rhs_scale.append(sig * frac_o[d])

    A = ComponentLaplacianOp(grid, 1.0, dgs)
    precond = VelocityPrecond(grid, 1.0, penal_dg=dg_full3, diag3=A.diagonal3())

    # divergence constraint on the unit-ball cells (obstacle band included:
    # dropping it lets mass leak through the smeared boundary and lowers the
    # drag); cells of the penalized exterior carry decoupled near-null Schur
    # modes and are excluded
    Xc, Yc, Zc = grid.cell_mesh()
    rad_c = np.sqrt(Xc ** 2 + Yc ** 2 + Zc ** 2) + np.zeros(grid.shape)
    p_active = rad_c < BALL_RADIUS

    sols, qs, infos = [], [], []
    div_scale = None
    for i in range(3):
        f = []
        for d in range(3):
            fd = np.zeros(face_shape(grid, d))
            if d == i:
                fd += rhs_scale[d]
                sl = [slice(None)] * 3
                sl[d] = 0
                fd[tuple(sl)] = 0.0
                sl[d] = -1
                fd[tuple(sl)] = 0.0
            f.append(fd)
        u0 = p0 = None
        if i > 0:
            # warm start: coordinate-swap the first solution (exact for
            # coordinate-symmetric obstacles, a good guess otherwise)
            u0 = _rotate_solution(sols[0], i)
            p0 = _rotate_pressure(qs[0], i)
        res = stokes_solve(grid, 1.0, tuple(f), operator=A, precond=precond,
                           tol_div=tol_div, inner_tol=inner_tol, u0=u0, p0=p0,
                           p_active=p_active, div_scale=div_scale)
        if i == 0:
            div_scale = res.info["residuals"][0]
        sols.append(res.u)
        qs.append(res.p)
        infos.append(res.info)
    return CellSolution(grid, shape, float(s), int(resolution), sols, qs,
                        tuple(frac_o), tuple(frac_e), infos)


def _rotate_solution(u, i):
    """Map the e^0 solution to an initial guess for e^i on the cubically
    symmetric grid (exact for coordinate-symmetric obstacles)."""
    ux, uy, uz = u
    if i == 1:
        # (x,y,z) -> (y,x,z): swap roles of components 0 and 1
        return (uy.transpose(1, 0, 2).copy(), ux.transpose(1, 0, 2).copy(),
                uz.transpose(1, 0, 2).copy())
    # (x,y,z) -> (z,y,x)
    return (uz.transpose(2, 1, 0).copy(), uy.transpose(2, 1, 0).copy(),
            ux.transpose(2, 1, 0).copy())


def _rotate_pressure(q, i):
    if i == 1:
        return q.transpose(1, 0, 2).copy()
    return q.transpose(2, 1, 0).copy()


# ---------------------------------------------------------------------------
# gradient components at native locations, Gram quadrature
# ---------------------------------------------------------------------------

def gradient_components(grid, u):
    """All nine d(u_b)/d(a) at their native MAC locations.

    Returns {"cell": (dxux, dyuy, dzuz), "xy": (dyux, dxuy), "xz": (dzux, dxuz),
    "yz": (dzuy, dyuz)}; ghost values outside walls are irrelevant here (the
    quadrature weights vanish there) and use the half-gap convention.
    """
    ux, uy, uz = u
    hx, hy, hz = grid.hx, grid.hy, grid.hz
    dxc, dyc, dzc = (grid.face_gaps(d) for d in range(3))

    dxux = (ux[1:] - ux[:-1]) / hx[:, None, None]
    dyuy = (uy[:, 1:] - uy[:, :-1]) / hy[None, :, None]
    dzuz = (uz[:, :, 1:] - uz[:, :, :-1]) / hz[None, None, :]

    def ddir(a, u_, axis, gaps):
        shp = list(u_.shape)
        shp[axis] += 1
        out = np.zeros(tuple(shp))
        sl = [slice(None)] * 3
        sl[axis] = slice(1, -1)
        sl_lo = [slice(None)] * 3
        sl_lo[axis] = slice(0, -1)
        sl_hi = [slice(None)] * 3
        sl_hi[axis] = slice(1, None)
        gview = [None, None, None]
        gview[axis] = gaps[1:-1]
        shape_g = [1, 1, 1]
        shape_g[axis] = -1
        out[tuple(sl)] = (u_[tuple(sl_hi)] - u_[tuple(sl_lo)]) / gaps[1:-1].reshape(shape_g)
        sl[axis] = 0
        sl_lo[axis] = 0
        out[tuple(sl)] = u_[tuple(sl_lo)] / gaps[0]
        sl[axis] = -1
        sl_lo[axis] = -1
        out[tuple(sl)] = -u_[tuple(sl_lo)] / gaps[-1]
        return out

    dyux = ddir(0, ux, 1, dyc)
    dzux = ddir(0, ux, 2, dzc)
    dxuy = ddir(1, uy, 0, dxc)
    dzuy = ddir(1, uy, 2, dzc)
    dxuz = ddir(2, uz, 0, dxc)
    dyuz = ddir(2, uz, 1, dyc)
    return {"cell": (dxux, dyuy, dzuz), "xy": (dyux, dxuy),
            "xz": (dzux, dxuz), "yz": (dzuy, dyuz)}


def _region_fractions_at(grid, family, region_fn, nsub=2):
    """Fluid fractions sampled at cell/edge control volumes."""
    if family == "cell":
        axes = ()
    else:
        axes = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}[family]
    coords = []
    widths = []
    for d in range(3):
        if d in axes:
            coords.append(grid.face_coords(d))
            widths.append(grid.face_gaps(d))
        else:
            coords.append(grid.cell_coords(d))
            widths.append(grid.h_of(d))
    shp = tuple(len(c) for c in coords)
    acc = np.zeros(shp)
    offs = [((np.arange(nsub) + 0.5) / nsub - 0.5) for _ in range(3)]
    for a in range(nsub):
        for b in range(nsub):
            for c in range(nsub):
                cs = [coords[0] + offs[0][a] * widths[0],
                      coords[1] + offs[1][b] * widths[1],
                      coords[2] + offs[2][c] * widths[2]]
                X, Y, Z = np.ix_(*cs)
                acc += region_fn(X, Y, Z)
    acc /= nsub ** 3
    w = np.einsum("i,j,k->ijk", widths[0], widths[1], widths[2])
    return acc * w


def _fluid_region_fn(shape, s, rmax=BALL_RADIUS):
    def fn(X, Y, Z):
        r = np.sqrt(X * X + Y * Y + Z * Z)
        R = _support_on_mesh(shape, X / s, Y / s, Z / s)
        return ((r < rmax) & (r / s > R)).astype(float)
    return fn


def drag_matrix(sol, nsub=2):
    """C_ij = int_{fluid} grad v^i : grad v^j with the solver's discrete
    gradients, quadrature at their native locations weighted by sampled
    fluid-region fractions. Symmetric by construction."""
    grid = sol.grid
    region = _fluid_region_fn(sol.shape, sol.s)
    wts = {fam: _region_fractions_at(grid, fam, region, nsub)
           for fam in ("cell", "xy", "xz", "yz")}
    comps = [gradient_components(grid, u) for u in sol.v]
    C = np.zeros((3, 3))
    for i in range(3):
        for j in range(i, 3):
            acc = 0.0
            for fam in ("cell", "xy", "xz", "yz"):
                w = wts[fam]
                for gi, gj in zip(comps[i][fam], comps[j][fam]):
                    acc += float(np.einsum("ijk,ijk,ijk->", w, gi, gj))
            C[i, j] = C[j, i] = acc
    return C


@dataclass
class DecayReport:
    r: float
    d: float
    c_v: float        # sup |v| |x| / r over r < |x| < 1
    c_grad: float     # sup |grad v| |x|^2 / r
    c_q: float        # sup |q| |x|^2 / r
    l2_v: float       # int_{B(0,d) fluid} |v|^2 and its bound ratio
    l2_grad: float
    l2_q: float
    ratio_v: float    # l2_v / (r^2 d)
    ratio_grad: float  # l2_grad / r
    ratio_q: float


def decay_diagnostics(sol, r, d, i=0):
    """Estimated constants of the pointwise and L^2 decay bounds for v^i."""
    rmax_K = sol.s * sol.shape.max_radius()
    if not (rmax_K <= r <= d <= 1.0):
        raise NestingError(
            f"need K (radius {rmax_K:.4f}) inside B(0,r={r}) inside B(0,d={d}) inside B(0,1)")
    grid = sol.grid
    u = sol.v[i]
    q = sol.q[i]
    from .numerics.operators import cell_avg
    vc = [cell_avg(u[dd], dd) for dd in range(3)]
    speed = np.sqrt(vc[0] ** 2 + vc[1] ** 2 + vc[2] ** 2)
    comps = gradient_components(grid, u)
    g2 = sum(cell_avg(cell_avg(gg, a), b) ** 2
             for (a, b), pair in zip(((0, 1), (0, 2), (1, 2)),
                                     (comps["xy"], comps["xz"], comps["yz"]))
             for gg in pair)
    g2 = g2 + sum(gg ** 2 for gg in comps["cell"])
    gmag = np.sqrt(g2)

    X, Y, Z = grid.cell_mesh()
    rad = np.sqrt(X * X + Y * Y + Z * Z) + 0.0 * speed
    shell = (rad > r) & (rad < 1.0)
    c_v = float((speed * rad / r)[shell].max()) if shell.any() else 0.0
    c_grad = float((gmag * rad ** 2 / r)[shell].max()) if shell.any() else 0.0
    c_q = float((np.abs(q) * rad ** 2 / r)[shell].max()) if shell.any() else 0.0

    region = _fluid_region_fn(sol.shape, sol.s, rmax=d)
    w = _region_fractions_at(grid, "cell", region, nsub=2)
    l2_v = float(np.einsum("ijk,ijk->", w, speed ** 2))
    l2_g = float(np.einsum("ijk,ijk->", w, g2))
    l2_q = float(np.einsum("ijk,ijk->", w, q ** 2))
    return DecayReport(r, d, c_v, c_grad, c_q, l2_v, l2_g, l2_q,
                       l2_v / (r * r * d), l2_g / r, l2_q / r)


# ---------------------------------------------------------------------------
# drag cache (text records)
# ---------------------------------------------------------------------------

class DragCache:
    """Append-only text cache: one record per line -
    shape_hash s resolution C[9] energy_residual div_residual."""

    def __init__(self, path):
        self.path = path
        self._mem = {}
        if path is not None and os.path.exists(path):
            with open(path) as f:
                for line in f:
                    parts = line.split()
                    if len(parts) != 14:
                        continue
                    key = (parts[0], float(parts[1]), int(parts[2]))
                    self._mem[key] = np.array([float(v) for v in parts[3:12]]).reshape(3, 3)

    def key(self, shape, s, resolution):
        return (shape.cache_key(), round(float(s), 12), int(resolution))

    def get(self, shape, s, resolution):
        return self._mem.get(self.key(shape, s, resolution))

    def put(self, shape, s, resolution, C, energy_resid=0.0, div_resid=0.0):
        k = self.key(shape, s, resolution)
        self._mem[k] = np.asarray(C, dtype=float)
        if self.path is not None:
            entries = " ".join(repr(float(v)) for v in np.asarray(C).ravel())
            with open(self.path, "a") as f:
                f.write(f"{k[0]} {k[1]!r} {k[2]} {entries} "
                        f"{energy_resid!r} {div_resid!r}\n")


def drag_for(shape, s, resolution=128, cache=None, allow_solve=True, **kw):
    """Cached drag matrix for K = s*shape at the given effective resolution."""
    if cache is not None:
        C = cache.get(shape, s, resolution)
        if C is not None:
            return C
    if not allow_solve:
        raise CacheMissError(
            f"drag matrix for shape {shape.cache_key()} s={s} resolution={resolution} "
            f"not cached and solving is disabled")
    sol = solve_cell_problem(shape, s, resolution, **kw)
    C = drag_matrix(sol)
    if cache is not None:
        e_ops = sol.operator_energies()
        resid = max(abs(e_ops[i] - C[i, i]) / max(C[i, i], 1e-300) for i in range(3))
        cache.put(shape, s, resolution, C, resid, sol.divergence_max())
    return C
