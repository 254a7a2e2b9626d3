"""Pure-numpy implementations of the hot stencil kernels.

Mirror of the compiled extension in _kernels.pyx; brinkhom.kernels picks
whichever is available. All operators act in "integrated" (energy) form:
coefficient arrays already carry face conductances / control volumes, so
<A x, x> is the discrete energy and every operator here is symmetric.

Out-of-range neighbours are value-0 (homogeneous Dirichlet); boundary
coefficient entries therefore contribute to the diagonal only.
"""

import numpy as np


def apply_poisson7(out, x, cfx, cfy, cfz, dg):
    """7-point variable-coefficient apply: out = (sum cf + dg)*x - cf*neighbours.

    x:   (a, b, c)
    cfx: (a+1, b, c) face conductances along axis 0 (boundary faces included)
    cfy: (a, b+1, c), cfz: (a, b, c+1)
    dg:  (a, b, c) extra diagonal (mass shift, penalization)
    """
    np.multiply(dg, x, out=out)
    out += (cfx[:-1] + cfx[1:]) * x
    out += (cfy[:, :-1] + cfy[:, 1:]) * x
    out += (cfz[:, :, :-1] + cfz[:, :, 1:]) * x
    out[1:] -= cfx[1:-1] * x[:-1]
    out[:-1] -= cfx[1:-1] * x[1:]
    out[:, 1:] -= cfy[:, 1:-1] * x[:, :-1]
    out[:, :-1] -= cfy[:, 1:-1] * x[:, 1:]
    out[:, :, 1:] -= cfz[:, :, 1:-1] * x[:, :, :-1]
    out[:, :, :-1] -= cfz[:, :, 1:-1] * x[:, :, 1:]
    return out


def upwind_update(out, q, fu, fv, fw, rx, ry, rz):
    """Conservative donor-cell update: out = q - dt*div(flux).

    q: (a, b, c); fu: (a+1, b, c), fv, fw analogous - advecting normal
    velocities on the faces of q's grid. rx = dt/hx etc. Donor value for
    inflow through a boundary face is 0 (callers keep wall fluxes at 0).
    """
    fx = np.empty_like(fu)
    fx[1:-1] = np.where(fu[1:-1] > 0.0, q[:-1], q[1:]) * fu[1:-1]
    fx[0] = np.where(fu[0] > 0.0, 0.0, q[0]) * fu[0]
    fx[-1] = np.where(fu[-1] > 0.0, q[-1], 0.0) * fu[-1]

    fy = np.empty_like(fv)
    fy[:, 1:-1] = np.where(fv[:, 1:-1] > 0.0, q[:, :-1], q[:, 1:]) * fv[:, 1:-1]
    fy[:, 0] = np.where(fv[:, 0] > 0.0, 0.0, q[:, 0]) * fv[:, 0]
    fy[:, -1] = np.where(fv[:, -1] > 0.0, q[:, -1], 0.0) * fv[:, -1]

    fz = np.empty_like(fw)
    fz[:, :, 1:-1] = np.where(fw[:, :, 1:-1] > 0.0, q[:, :, :-1], q[:, :, 1:]) * fw[:, :, 1:-1]
    fz[:, :, 0] = np.where(fw[:, :, 0] > 0.0, 0.0, q[:, :, 0]) * fw[:, :, 0]
    fz[:, :, -1] = np.where(fw[:, :, -1] > 0.0, q[:, :, -1], 0.0) * fw[:, :, -1]

    np.copyto(out, q)
    out -= rx * (fx[1:] - fx[:-1])
    out -= ry * (fy[:, 1:] - fy[:, :-1])
    out -= rz * (fz[:, :, 1:] - fz[:, :, :-1])
    return out


def strain_fields(ux, uy, uz, hx, hy, hz, dxc, dyc, dzc):
    """Diagonal strains at cells and symmetric cross-strains at edges.

    Returns (sxx, syy, szz, gxy, gxz, gyz); g_ab = du_a/db + du_b/da with
    value-0 ghosts outside walls (dxc/dyc/dzc carry the half-cell gaps).
    """
    sxx = (ux[1:] - ux[:-1]) / hx[:, None, None]
    syy = (uy[:, 1:] - uy[:, :-1]) / hy[None, :, None]
    szz = (uz[:, :, 1:] - uz[:, :, :-1]) / hz[None, None, :]

    nx1, ny, nz = ux.shape
    nx = nx1 - 1
    ny1 = ny + 1
    nz1 = nz + 1

    gxy = np.zeros((nx + 1, ny + 1, nz))
    gxy[:, 1:-1] += (ux[:, 1:] - ux[:, :-1]) / dyc[None, 1:-1, None]
    gxy[:, 0] += ux[:, 0] / dyc[0]
    gxy[:, -1] += -ux[:, -1] / dyc[-1]
    gxy[1:-1] += (uy[1:] - uy[:-1]) / dxc[1:-1, None, None]
    gxy[0] += uy[0] / dxc[0]
    gxy[-1] += -uy[-1] / dxc[-1]

    gxz = np.zeros((nx + 1, ny, nz + 1))
    gxz[:, :, 1:-1] += (ux[:, :, 1:] - ux[:, :, :-1]) / dzc[None, None, 1:-1]
    gxz[:, :, 0] += ux[:, :, 0] / dzc[0]
    gxz[:, :, -1] += -ux[:, :, -1] / dzc[-1]
    gxz[1:-1] += (uz[1:] - uz[:-1]) / dxc[1:-1, None, None]
    gxz[0] += uz[0] / dxc[0]
    gxz[-1] += -uz[-1] / dxc[-1]

    gyz = np.zeros((nx, ny + 1, nz + 1))
    gyz[:, :, 1:-1] += (uy[:, :, 1:] - uy[:, :, :-1]) / dzc[None, None, 1:-1]
    gyz[:, :, 0] += uy[:, :, 0] / dzc[0]
    gyz[:, :, -1] += -uy[:, :, -1] / dzc[-1]
    gyz[:, 1:-1] += (uz[:, 1:] - uz[:, :-1]) / dyc[None, 1:-1, None]
    gyz[:, 0] += uz[:, 0] / dyc[0]
    gyz[:, -1] += -uz[:, -1] / dyc[-1]

    return sxx, syy, szz, gxy, gxz, gyz


def apply_viscous_strain(outx, outy, outz, ux, uy, uz,
                         ac, exy, exz, eyz, dgx, dgy, dgz,
                         hx, hy, hz, dxc, dyc, dzc):
    """Symmetric-gradient viscous apply (integrated form) plus diagonal terms.

    <A u, u> = sum_cells ac*(sxx^2+syy^2+szz^2) + sum_edges e*g^2 + sum dg*u^2
    which with ac = 2*mu*vol and e = mu*vol equals int mu/2 |grad u + grad u^T|^2.
    Wall-normal faces (first/last slice of each component) are zeroed.
    """
    sxx, syy, szz, gxy, gxz, gyz = strain_fields(ux, uy, uz, hx, hy, hz, dxc, dyc, dzc)
    asx = ac * sxx
    asy = ac * syy
    asz = ac * szz
    egxy = exy * gxy
    egxz = exz * gxz
    egyz = eyz * gyz

    np.multiply(dgx, ux, out=outx)
    outx[1:-1] += asx[:-1] / hx[:-1, None, None] - asx[1:] / hx[1:, None, None]
    outx += egxy[:, :-1] / dyc[None, :-1, None] - egxy[:, 1:] / dyc[None, 1:, None]
    outx += egxz[:, :, :-1] / dzc[None, None, :-1] - egxz[:, :, 1:] / dzc[None, None, 1:]
    outx[0] = 0.0
    outx[-1] = 0.0

    np.multiply(dgy, uy, out=outy)
    outy[:, 1:-1] += asy[:, :-1] / hy[None, :-1, None] - asy[:, 1:] / hy[None, 1:, None]
    outy += egxy[:-1] / dxc[:-1, None, None] - egxy[1:] / dxc[1:, None, None]
    outy += egyz[:, :, :-1] / dzc[None, None, :-1] - egyz[:, :, 1:] / dzc[None, None, 1:]
    outy[:, 0] = 0.0
    outy[:, -1] = 0.0

    np.multiply(dgz, uz, out=outz)
    outz[:, :, 1:-1] += asz[:, :, :-1] / hz[None, None, :-1] - asz[:, :, 1:] / hz[None, None, 1:]
    outz += egxz[:-1] / dxc[:-1, None, None] - egxz[1:] / dxc[1:, None, None]
    outz += egyz[:, :-1] / dyc[None, :-1, None] - egyz[:, 1:] / dyc[None, 1:, None]
    outz[:, :, 0] = 0.0
    outz[:, :, -1] = 0.0

    return outx, outy, outz
