"""Microscale coupled solver on the penalized MAC grid: mass transport,
quasi-static heat balance, and momentum with temperature-dependent
viscosity and buoyancy forcing.

The step is built so that the discrete energy inequality holds by
construction: upwind transport of the (density, momentum) pair is a convex
update under the CFL bound, the viscous/friction step is implicit, the
buoyancy forcing and the heat dissipation cancel exactly through an
adjoint transfer pair and a converged velocity-temperature fixed point,
and the projection is orthogonal in the penalization-augmented density
metric. Everything the monitors accumulate is the quantity the scheme
actually dissipated.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .numerics.grid import StaggeredGrid, face_shape
from .numerics.operators import (CellFaceTransfer, ViscousOp, cell_avg,
                                 divergence, face_avg, gradient_pointwise,
                                 heat_operator, pressure_operator)
from .numerics.solvers import SolverError, pcg, stokes_solve, tcopy
from .numerics.transforms import FastDiagPoisson, VelocityPrecond

PENAL = 1.0e6  # sigma = PENAL * mu_lo / h^2 in solid cells (eta = 1e-6 h^2/mu)


class CFLError(RuntimeError):
    pass


class MonitorViolation(AssertionError):
    pass


class ViscosityModel:
    """mu(theta) with certified bounds on [-t, t]."""

    def __init__(self, kind="constant", mu0=1.0, c=0.0):
        if kind not in ("constant", "quadratic"):
            raise ValueError(f"unknown viscosity model {kind!r}")
        self.kind = kind
        self.mu0 = float(mu0)
        self.c = float(c) if kind == "quadratic" else 0.0
        if self.mu0 <= 0 or self.c < 0:
            raise ValueError("need mu0 > 0 and c >= 0")

    def __call__(self, theta):
        if self.kind == "constant":
            return self.mu0 + 0.0 * np.asarray(theta)
        return self.mu0 + self.c * np.asarray(theta) ** 2

    def bounds(self, theta_max):
        return self.mu0, self.mu0 + self.c * theta_max ** 2


@dataclass
class PhysParams:
    kappa_f: float = 1.0
    kappa_s: float = 1.0
    mu: ViscosityModel = field(default_factory=ViscosityModel)
    grad_F: tuple = (0.0, 0.0, 0.0)   # constant gravitational-potential gradient
    rho_lo: float = 0.5
    rho_hi: float = 2.0
    rho_s: float = 1.0

    def __post_init__(self):
        if self.kappa_f <= 0 or self.kappa_s <= 0:
            raise ValueError("conductivities must be positive")
        if not (0 < self.rho_lo <= self.rho_s <= self.rho_hi):
            raise ValueError("need 0 < rho_lo <= rho_s <= rho_hi")

    @property
    def mu_lo(self):
        return self.mu.bounds(0.0)[0]


@dataclass
class FluidState:
    grid: StaggeredGrid
    rho: np.ndarray
    rho_faces: list
    u: list
    theta: np.ndarray
    p: np.ndarray
    t: float = 0.0

    @classmethod
    def from_initial(cls, grid, rho0, u0=None):
        rho = np.asarray(rho0, dtype=float).copy()
        u = ([np.zeros(face_shape(grid, d)) for d in range(3)]
             if u0 is None else [np.asarray(c, dtype=float).copy() for c in u0])
        rho_faces = [face_avg(rho, d) for d in range(3)]
        return cls(grid, rho, rho_faces, u, np.zeros(grid.shape),
                   np.zeros(grid.shape), 0.0)

    def kinetic_energy(self):
        return sum(0.5 * self.grid.dot_faces(self.rho_faces[d] * self.u[d],
                                             self.u[d], d) for d in range(3))

    def max_u(self):
        return max(float(np.abs(c).max()) for c in self.u)


@dataclass
class MonitorTrace:
    columns = ("step", "t", "kinetic", "cum_visc", "cum_heat", "cum_friction",
               "energy_residual", "mass", "min_rho", "max_rho", "sup_theta",
               "holder_quotient", "l2_rho", "max_u_solid", "cfl")
    rows: list = field(default_factory=list)

    def append(self, **kw):
        self.rows.append(tuple(kw[c] for c in self.columns))

    def last(self, name):
        return self.rows[-1][self.columns.index(name)]

    def series(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self, path):
        with open(path, "w") as f:
            f.write(",".join(self.columns) + "\n")
            for r in self.rows:
                f.write(",".join(repr(v) for v in r) + "\n")


def holder_quotient(grid, theta, nu=0.25, offsets=(1, 2, 4, 8)):
    """Discrete C^nu seminorm estimate over axis-aligned sampled pairs."""
    best = 0.0
    for d in range(3):
        h = float(grid.h_of(d).mean())
        for k in offsets:
            if theta.shape[d] <= k:
                continue
            sl_lo = [slice(None)] * 3
            sl_hi = [slice(None)] * 3
            sl_lo[d] = slice(0, -k)
            sl_hi[d] = slice(k, None)
            diff = float(np.abs(theta[tuple(sl_hi)] - theta[tuple(sl_lo)]).max())
            best = max(best, diff / (k * h) ** nu)
    return best


class Stepper:
    """Owns the grid, masks, physics and solver plumbing for one run.

    With no mask and no Brinkman field this is exactly the homogenized
    stepper with D = 0; the homogenized solver reuses it bit for bit.
    """

    def __init__(self, grid, params, mask=None, brinkman=None,
                 inner_tol=1e-11, proj_tol=1e-12, heat_tol=1e-12):
        self.grid = grid
        self.params = params
        self.mask = mask
        self.brinkman = brinkman
        self.inner_tol = inner_tol
        self.proj_tol = proj_tol
        self.heat_tol = heat_tol

        shape = grid.shape
        self.solid = (mask.solid.astype(bool) if mask is not None
                      else np.zeros(shape, dtype=bool))
        self.kappa = np.where(self.solid, params.kappa_s, params.kappa_f)
        # penalization sigma at faces (pointwise), weighted by solid fractions
        self.sigma_pt = []
        for d in range(3):
            frac = mask.face_frac[d] if mask is not None else 0.0
            w = grid.face_volumes(d)
            sig = PENAL * params.mu_lo / w ** (2.0 / 3.0)
            self.sigma_pt.append(sig * frac if mask is not None else np.zeros(face_shape(grid, d)))
        self.sigma_dg = [self.sigma_pt[d] * grid.face_volumes(d) for d in range(3)]
        self.has_penal = any(float(s.max()) > 0 for s in self.sigma_pt)

        self.transfer = CellFaceTransfer(
            grid,
            *[np.full(face_shape(grid, d), float(params.grad_F[d])) for d in range(3)])
        self.heat_op = heat_operator(grid, self.kappa)
        kbar = float(self.kappa.mean())
        self.heat_pre = FastDiagPoisson(grid, "cell-dirichlet", kbar)
        self.vols = grid.cell_volumes()
        self.proj_pre = FastDiagPoisson(grid, "cell-neumann", 1.0)
        self._heat_warm = None
        self._proj_warm = None

    # --- heat --------------------------------------------------------------
    def heat_solve(self, u, tol=None):
        """Quasi-static temperature for the given velocity. Theta = 0 when
        the forcing potential is absent."""
        b = self.vols * self.transfer.to_cells(*u)
        if float(np.abs(b).max()) == 0.0:
            return np.zeros(self.grid.shape), {"iterations": 0, "converged": True}
        th, info = pcg(lambda x: self.heat_op.matvec(x), b,
                       M=lambda r: self.heat_pre.solve(r),
                       tol=tol or self.heat_tol, maxit=4000, x0=self._heat_warm)
        if not info["converged"]:
            raise SolverError("heat solve did not converge", info["residuals"])
        self._heat_warm = (th[0].copy(),)
        return th[0], info

    def heat_dissipation(self, theta):
        return float(np.vdot(theta, self.heat_op.matvec(theta)).real)

    # --- advection ---------------------------------------------------------
    def _shifted_advecting(self, u, d):
        """Advecting normal velocities on the faces of the d-component's
        shifted grid; discretely divergence-free there when u is."""
        grid = self.grid
        outs = []
        for e in range(3):
            if e == d:
                a, b, c = face_shape(grid, d)
                shp = list((a, b, c))
                shp[d] += 1
                fu = np.zeros(tuple(shp))
                sl = [slice(None)] * 3
                sl[d] = slice(1, -1)
                lo = [slice(None)] * 3
                lo[d] = slice(0, -1)
                hi = [slice(None)] * 3
                hi[d] = slice(1, None)
                fu[tuple(sl)] = 0.5 * (u[d][tuple(lo)] + u[d][tuple(hi)])
            else:
                shp = list(face_shape(grid, d))
                shp[e] += 1
                fu = np.zeros(tuple(shp))
                sl = [slice(None)] * 3
                sl[d] = slice(1, -1)
                lo = [slice(None)] * 3
                lo[d] = slice(0, -1)
                hi = [slice(None)] * 3
                hi[d] = slice(1, None)
                fu[tuple(sl)] = 0.5 * (u[e][tuple(lo)] + u[e][tuple(hi)])
            outs.append(np.ascontiguousarray(fu))
        return outs

    def advect(self, state, dt):
        """Conservative donor-cell transport of rho and of the staggered
        (rho, momentum) pairs by the frozen face velocities."""
        grid = self.grid
        h = [float(grid.h_of(d)[0]) for d in range(3)]
        u = [np.ascontiguousarray(c) for c in state.u]
        out_rho = np.empty_like(state.rho)
        kernels.upwind_update(out_rho, np.ascontiguousarray(state.rho),
                              u[0], u[1], u[2], dt / h[0], dt / h[1], dt / h[2])
        new_rho_faces = []
        new_m = []
        for d in range(3):
            fu = self._shifted_advecting(u, d)
            m = np.ascontiguousarray(state.rho_faces[d] * state.u[d])
            rf = np.ascontiguousarray(state.rho_faces[d])
            om = np.empty_like(m)
            orf = np.empty_like(rf)
            kernels.upwind_update(om, m, fu[0], fu[1], fu[2],
                                  dt / h[0], dt / h[1], dt / h[2])
            kernels.upwind_update(orf, rf, fu[0], fu[1], fu[2],
                                  dt / h[0], dt / h[1], dt / h[2])
            sl0 = [slice(None)] * 3
            sl0[d] = 0
            sl1 = [slice(None)] * 3
            sl1[d] = -1
            om[tuple(sl0)] = 0.0
            om[tuple(sl1)] = 0.0
            new_rho_faces.append(orf)
            new_m.append(om)
        return out_rho, new_rho_faces, new_m

    # --- one full step -----------------------------------------------------
    def step(self, state, dt):
        grid = self.grid
        hmin = grid.min_h()
        umax = state.max_u()
        cfl = dt * umax / hmin
        if cfl > 0.5 + 1e-12:
            raise CFLError(f"CFL {cfl:.3f} > 0.5 (dt={dt}, max|u|={umax:.3e})")

        rho_new, rho_faces_new, m_new = self.advect(state, dt)

        mu_cell = self.params.mu(state.theta)
        mass_dg = [rho_faces_new[d] * grid.face_volumes(d) / dt for d in range(3)]
        dgs = [mass_dg[d] + self.sigma_dg[d] for d in range(3)]
        A = ViscousOp(grid, mu_cell, *dgs)
        mu_hat = float(mu_cell.mean())
        shift = float(np.mean([rf.mean() for rf in rho_faces_new])) / dt
        diag3 = A.diagonal3() if self.has_penal else None
        pre = VelocityPrecond(grid, 1.35 * mu_hat, shift=shift,
                              penal_dg=self.sigma_dg if self.has_penal else None,
                              diag3=diag3)

        if self.brinkman is None:
            matvec = A.matvec3
            fric_op = None
        else:
            fric_op = self.brinkman.operator(mu_cell)

            def matvec(ux, uy, uz):
                ox, oy, oz = A.matvec3(ux, uy, uz)
                ex, ey, ez = fric_op(ux, uy, uz)
                return ox + ex, oy + ey, oz + ez

        rhs0 = tuple(m_new[d] * grid.face_volumes(d) / dt for d in range(3))
        u_star = tuple(np.where(rf > 0, m / rf, 0.0)
                       for m, rf in zip(m_new, rho_faces_new))

        # velocity-temperature fixed point: the quasi-static heat balance is
        # enforced at the end-of-step velocity, which makes the buoyancy
        # power equal the recorded heat dissipation exactly
        theta = state.theta
        u_new = u_star
        have_forcing = any(abs(g) > 0 for g in self.params.grad_F)
        n_pass = 4 if have_forcing else 1
        for it in range(n_pass):
            if have_forcing:
                g3 = self.transfer.to_faces(theta, sign=-1.0)
                rhs = tuple(r + g for r, g in zip(rhs0, g3))
            else:
                rhs = rhs0
            u_new, info = pcg(matvec, rhs, x0=u_new, M=pre.apply3,
                              tol=self.inner_tol, maxit=3000)
            if not info["converged"]:
                raise SolverError("implicit momentum solve stalled",
                                  info["residuals"])
            if not have_forcing:
                theta_new = theta if self.params.kappa_f == self.params.kappa_s \
                    else self.heat_solve(u_new)[0]
                theta = theta_new
                break
            theta_new, _ = self.heat_solve(u_new)
            dth = float(np.abs(theta_new - theta).max())
            theta = theta_new
            if dth <= 1e-11 * max(float(np.abs(theta).max()), 1e-30):
                break

        visc_diss = A.strain_energy(*u_new)
        fric_diss = 0.0
        if fric_op is not None:
            fu = fric_op(*u_new)
            fric_diss = sum(float(np.vdot(a, b).real) for a, b in zip(fu, u_new))
        heat_diss = self.heat_dissipation(theta) if have_forcing else 0.0

        # projection in the penalization-augmented density metric
        rho_tilde = [rho_faces_new[d] + dt * self.sigma_pt[d] for d in range(3)]
        u_proj, phi, pinfo = self._project(u_new, rho_tilde)

        new_state = FluidState(grid, rho_new, rho_faces_new, list(u_proj),
                               theta, phi / dt, state.t + dt)
        diag = {
            "cfl": cfl,
            "visc_diss": visc_diss,
            "heat_diss": heat_diss,
            "fric_diss": fric_diss,
            "proj_info": pinfo,
            "mom_info": info,
        }
        return new_state, diag

    def _project(self, u, rho_tilde):
        grid = self.grid
        pop = pressure_operator(grid, rho_tilde)
        div = divergence(grid, *u)
        rhs = -self.vols * div
        rhs -= rhs.mean()

        def M(r):
            z = self.proj_pre.solve(r)
            return z - z.mean()

        phi, info = pcg(lambda q: pop.matvec(q), rhs, M=M, tol=self.proj_tol,
                        maxit=6000, x0=self._proj_warm)
        if not info["converged"]:
            raise SolverError("projection solve stalled", info["residuals"])
        phi = phi[0] - phi[0].mean()
        self._proj_warm = (phi.copy(),)
        g3 = gradient_pointwise(grid, phi)
        out = tuple(u[d] - g3[d] / rho_tilde[d] for d in range(3))
        for d, od in enumerate(out):
            sl = [slice(None)] * 3
            sl[d] = 0
            od[tuple(sl)] = 0.0
            sl[d] = -1
            od[tuple(sl)] = 0.0
        return out, phi, info


def evolve(state0, params, t_end, dt, mask=None, brinkman=None, stepper=None,
           on_step=None, enforce_monitors=True, trace=None,
           checkpoint_every=None, checkpoint_dir=None):
    """March the coupled system to t_end, recording the monitor trace and
    enforcing the conservation/energy assertions every step. Sub-step errors
    abort with the trace collected so far attached to the exception."""
    st = stepper if stepper is not None else Stepper(state0.grid, params,
                                                     mask=mask, brinkman=brinkman)
    grid = state0.grid
    trace = trace if trace is not None else MonitorTrace()
    state = state0
    kin0 = state.kinetic_energy()
    mass0 = grid.integrate_cells(state.rho)
    rho_min0 = float(state.rho.min())
    rho_max0 = float(state.rho.max())
    cum = {"visc": 0.0, "heat": 0.0, "fric": 0.0}
    eps_mp = 1e-12 * max(abs(rho_max0), 1.0)

    n_steps = int(round(t_end / dt))
    step = 0
    try:
        while step < n_steps:
            state, diag = st.step(state, dt)
            step += 1
            cum["visc"] += dt * diag["visc_diss"]
            cum["heat"] += dt * diag["heat_diss"]
            cum["fric"] += dt * diag["fric_diss"]
            kin = state.kinetic_energy()
            mass = grid.integrate_cells(state.rho)
            resid = kin + cum["visc"] + cum["heat"] + cum["fric"] - kin0
            sup_t = float(np.abs(state.theta).max())
            max_u_solid = 0.0
            if st.has_penal:
                vals = [float(np.abs(state.u[d][st.sigma_pt[d] > 0]).max())
                        for d in range(3) if (st.sigma_pt[d] > 0).any()]
                max_u_solid = max(vals) if vals else 0.0
            trace.append(step=step, t=state.t, kinetic=kin,
                         cum_visc=cum["visc"], cum_heat=cum["heat"],
                         cum_friction=cum["fric"], energy_residual=resid,
                         mass=mass, min_rho=float(state.rho.min()),
                         max_rho=float(state.rho.max()), sup_theta=sup_t,
                         holder_quotient=holder_quotient(grid, state.theta),
                         l2_rho=grid.dot_cells(state.rho, state.rho),
                         max_u_solid=max_u_solid, cfl=diag["cfl"])
            if enforce_monitors:
                if abs(mass - mass0) > 1e-10 * abs(mass0):
                    raise MonitorViolation(
                        f"mass drift {abs(mass - mass0) / abs(mass0):.3e} > 1e-10")
                if state.rho.min() < rho_min0 - eps_mp or state.rho.max() > rho_max0 + eps_mp:
                    raise MonitorViolation(
                        f"density bounds expanded: [{state.rho.min():.6e}, "
                        f"{state.rho.max():.6e}] vs [{rho_min0:.6e}, {rho_max0:.6e}]")
                if resid > 1e-6 * kin0 + 1e-8 * step:
                    raise MonitorViolation(
                        f"energy inequality violated: residual {resid:.3e} at step {step}")
                if diag["fric_diss"] < -1e-12 * max(kin0, 1.0):
                    raise MonitorViolation(
                        f"friction term not dissipative: {diag['fric_diss']:.3e}")
            if checkpoint_every and checkpoint_dir and step % checkpoint_every == 0:
                from . import io as bio
                bio.write_state(checkpoint_dir, state, step)
            if on_step is not None:
                on_step(step, state)
    except (SolverError, CFLError, MonitorViolation) as e:
        e.trace = trace
        raise
    return state, trace


# ---------------------------------------------------------------------------
# steady coupled solve (Picard)
# ---------------------------------------------------------------------------

class PicardError(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


def solve_steady_coupled(grid, params, f, mask=None, brinkman=None,
                         tol=1e-9, max_picard=60, tol_div=1e-8, inner_tol=1e-11):
    """Fixed point of theta -> Stokes(mu(theta)) -> heat: the steady coupled
    system with buoyancy-free forcing f. Returns (u, p, theta, info)."""
    st = Stepper(grid, params, mask=mask, brinkman=brinkman)
    theta = np.zeros(grid.shape)
    u_prev = None
    history = []
    p_active = None
    if st.has_penal:
        p_active = ~_deep_solid_cells(st)
    for it in range(max_picard):
        mu_cell = params.mu(theta)
        fric = st.brinkman.operator(mu_cell) if st.brinkman is not None else None
        res = stokes_solve(grid, mu_cell, f, sigma_dg=st.sigma_dg,
                           extra_op=fric, tol_div=tol_div, inner_tol=inner_tol,
                           u0=u_prev, p_active=p_active)
        theta_new, _ = st.heat_solve(res.u, tol=1e-12)
        du = 0.0 if u_prev is None else max(
            float(np.abs(a - b).max()) for a, b in zip(res.u, u_prev))
        dth = float(np.abs(theta_new - theta).max())
        history.append((du, dth))
        scale = max(max(float(np.abs(c).max()) for c in res.u), 1e-30)
        theta = theta_new
        u_prev = tcopy(res.u)
        if it > 0 and du <= tol * scale and dth <= tol * max(float(np.abs(theta).max()), 1e-30):
            return res.u, res.p, theta, {"picard_iterations": it + 1,
                                         "history": history,
                                         "stokes_info": res.info}
    raise PicardError(f"Picard iteration did not contract in {max_picard} steps",
                      history)


def _deep_solid_cells(st):
    """Cells all of whose faces are strongly penalized."""
    blocked = []
    for d in range(3):
        w = st.grid.face_volumes(d)
        sig_full = PENAL * st.params.mu_lo / w ** (2.0 / 3.0)
        blocked.append(st.sigma_pt[d] >= 0.5 * sig_full)
    deep = np.ones(st.grid.shape, dtype=bool)
    deep &= blocked[0][:-1] & blocked[0][1:]
    deep &= blocked[1][:, :-1] & blocked[1][:, 1:]
    deep &= blocked[2][:, :, :-1] & blocked[2][:, :, 1:]
    return deep
