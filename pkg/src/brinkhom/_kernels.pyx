# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels; semantics identical to _kernels_py."""

import numpy as np
cimport numpy as cnp


def apply_poisson7(double[:, :, ::1] out, double[:, :, ::1] x,
                   double[:, :, ::1] cfx, double[:, :, ::1] cfy, double[:, :, ::1] cfz,
                   double[:, :, ::1] dg):
    cdef Py_ssize_t a = x.shape[0], b = x.shape[1], c = x.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double v, acc
    for i in range(a):
        for j in range(b):
            for k in range(c):
                v = x[i, j, k]
                acc = (dg[i, j, k] + cfx[i, j, k] + cfx[i + 1, j, k]
                       + cfy[i, j, k] + cfy[i, j + 1, k]
                       + cfz[i, j, k] + cfz[i, j, k + 1]) * v
                if i > 0:
                    acc -= cfx[i, j, k] * x[i - 1, j, k]
                if i < a - 1:
                    acc -= cfx[i + 1, j, k] * x[i + 1, j, k]
                if j > 0:
                    acc -= cfy[i, j, k] * x[i, j - 1, k]
                if j < b - 1:
                    acc -= cfy[i, j + 1, k] * x[i, j + 1, k]
                if k > 0:
                    acc -= cfz[i, j, k] * x[i, j, k - 1]
                if k < c - 1:
                    acc -= cfz[i, j, k + 1] * x[i, j, k + 1]
                out[i, j, k] = acc
    return np.asarray(out)


cdef inline double _donor(double f, double qlo, double qhi) nogil:
    return f * (qlo if f > 0.0 else qhi)


def upwind_update(double[:, :, ::1] out, double[:, :, ::1] q,
                  double[:, :, ::1] fu, double[:, :, ::1] fv, double[:, :, ::1] fw,
                  double rx, double ry, double rz):
    cdef Py_ssize_t a = q.shape[0], b = q.shape[1], c = q.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double fl, fr, ql, qr
    for i in range(a):
        for j in range(b):
            for k in range(c):
                ql = q[i - 1, j, k] if i > 0 else 0.0
                qr = q[i + 1, j, k] if i < a - 1 else 0.0
                fl = _donor(fu[i, j, k], ql, q[i, j, k])
                fr = _donor(fu[i + 1, j, k], q[i, j, k], qr)
                out[i, j, k] = q[i, j, k] - rx * (fr - fl)

                ql = q[i, j - 1, k] if j > 0 else 0.0
                qr = q[i, j + 1, k] if j < b - 1 else 0.0
                fl = _donor(fv[i, j, k], ql, q[i, j, k])
                fr = _donor(fv[i, j + 1, k], q[i, j, k], qr)
                out[i, j, k] -= ry * (fr - fl)

                ql = q[i, j, k - 1] if k > 0 else 0.0
                qr = q[i, j, k + 1] if k < c - 1 else 0.0
                fl = _donor(fw[i, j, k], ql, q[i, j, k])
                fr = _donor(fw[i, j, k + 1], q[i, j, k], qr)
                out[i, j, k] -= rz * (fr - fl)
    return np.asarray(out)


def apply_viscous_strain(double[:, :, ::1] outx, double[:, :, ::1] outy, double[:, :, ::1] outz,
                         double[:, :, ::1] ux, double[:, :, ::1] uy, double[:, :, ::1] uz,
                         double[:, :, ::1] ac, double[:, :, ::1] exy,
                         double[:, :, ::1] exz, double[:, :, ::1] eyz,
                         double[:, :, ::1] dgx, double[:, :, ::1] dgy, double[:, :, ::1] dgz,
                         double[::1] hx, double[::1] hy, double[::1] hz,
                         double[::1] dxc, double[::1] dyc, double[::1] dzc):
    cdef Py_ssize_t nx = ac.shape[0], ny = ac.shape[1], nz = ac.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double g, gl, acc, uxm, uym, uzm

    # x-component: faces (nx+1, ny, nz), walls pinned to 0
    for i in range(nx + 1):
        for j in range(ny):
            for k in range(nz):
                if i == 0 or i == nx:
                    outx[i, j, k] = 0.0
                    continue
                acc = dgx[i, j, k] * ux[i, j, k]
                acc += ac[i - 1, j, k] * (ux[i, j, k] - ux[i - 1, j, k]) / (hx[i - 1] * hx[i - 1])
                acc -= ac[i, j, k] * (ux[i + 1, j, k] - ux[i, j, k]) / (hx[i] * hx[i])
                # gxy edges (i, j) and (i, j+1)
                uxm = ux[i, j - 1, k] if j > 0 else 0.0
                gl = (ux[i, j, k] - uxm) / dyc[j] + (uy[i, j, k] - uy[i - 1, j, k]) / dxc[i]
                acc += exy[i, j, k] * gl / dyc[j]
                uxm = ux[i, j + 1, k] if j < ny - 1 else 0.0
                g = (uxm - ux[i, j, k]) / dyc[j + 1] + (uy[i, j + 1, k] - uy[i - 1, j + 1, k]) / dxc[i]
                acc -= exy[i, j + 1, k] * g / dyc[j + 1]
                # gxz edges (i, k) and (i, k+1)
                uxm = ux[i, j, k - 1] if k > 0 else 0.0
                gl = (ux[i, j, k] - uxm) / dzc[k] + (uz[i, j, k] - uz[i - 1, j, k]) / dxc[i]
                acc += exz[i, j, k] * gl / dzc[k]
                uxm = ux[i, j, k + 1] if k < nz - 1 else 0.0
                g = (uxm - ux[i, j, k]) / dzc[k + 1] + (uz[i, j, k + 1] - uz[i - 1, j, k + 1]) / dxc[i]
                acc -= exz[i, j, k + 1] * g / dzc[k + 1]
                outx[i, j, k] = acc

    # y-component: faces (nx, ny+1, nz)
    for i in range(nx):
        for j in range(ny + 1):
            for k in range(nz):
                if j == 0 or j == ny:
                    outy[i, j, k] = 0.0
                    continue
                acc = dgy[i, j, k] * uy[i, j, k]
                acc += ac[i, j - 1, k] * (uy[i, j, k] - uy[i, j - 1, k]) / (hy[j - 1] * hy[j - 1])
                acc -= ac[i, j, k] * (uy[i, j + 1, k] - uy[i, j, k]) / (hy[j] * hy[j])
                # gxy edges (i, j) and (i+1, j)
                uym = uy[i - 1, j, k] if i > 0 else 0.0
                gl = (ux[i, j, k] - ux[i, j - 1, k]) / dyc[j] + (uy[i, j, k] - uym) / dxc[i]
                acc += exy[i, j, k] * gl / dxc[i]
                uym = uy[i + 1, j, k] if i < nx - 1 else 0.0
                g = (ux[i + 1, j, k] - ux[i + 1, j - 1, k]) / dyc[j] + (uym - uy[i, j, k]) / dxc[i + 1]
                acc -= exy[i + 1, j, k] * g / dxc[i + 1]
                # gyz edges (j, k) and (j, k+1)
                uym = uy[i, j, k - 1] if k > 0 else 0.0
                gl = (uy[i, j, k] - uym) / dzc[k] + (uz[i, j, k] - uz[i, j - 1, k]) / dyc[j]
                acc += eyz[i, j, k] * gl / dzc[k]
                uym = uy[i, j, k + 1] if k < nz - 1 else 0.0
                g = (uym - uy[i, j, k]) / dzc[k + 1] + (uz[i, j, k + 1] - uz[i, j - 1, k + 1]) / dyc[j]
                acc -= eyz[i, j, k + 1] * g / dzc[k + 1]
                outy[i, j, k] = acc

    # z-component: faces (nx, ny, nz+1)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz + 1):
                if k == 0 or k == nz:
                    outz[i, j, k] = 0.0
                    continue
                acc = dgz[i, j, k] * uz[i, j, k]
                acc += ac[i, j, k - 1] * (uz[i, j, k] - uz[i, j, k - 1]) / (hz[k - 1] * hz[k - 1])
                acc -= ac[i, j, k] * (uz[i, j, k + 1] - uz[i, j, k]) / (hz[k] * hz[k])
                # gxz edges (i, k) and (i+1, k)
                uzm = uz[i - 1, j, k] if i > 0 else 0.0
                gl = (ux[i, j, k] - ux[i, j, k - 1]) / dzc[k] + (uz[i, j, k] - uzm) / dxc[i]
                acc += exz[i, j, k] * gl / dxc[i]
                uzm = uz[i + 1, j, k] if i < nx - 1 else 0.0
                g = (ux[i + 1, j, k] - ux[i + 1, j, k - 1]) / dzc[k] + (uzm - uz[i, j, k]) / dxc[i + 1]
                acc -= exz[i + 1, j, k] * g / dxc[i + 1]
                # gyz edges (j, k) and (j+1, k)
                uzm = uz[i, j - 1, k] if j > 0 else 0.0
                gl = (uy[i, j, k] - uy[i, j, k - 1]) / dzc[k] + (uz[i, j, k] - uzm) / dyc[j]
                acc += eyz[i, j, k] * gl / dyc[j]
                uzm = uz[i, j + 1, k] if j < ny - 1 else 0.0
                g = (uy[i, j + 1, k] - uy[i, j + 1, k - 1]) / dzc[k] + (uzm - uz[i, j, k]) / dyc[j + 1]
                acc -= eyz[i, j + 1, k] * g / dyc[j + 1]
                outz[i, j, k] = acc

    return np.asarray(outx), np.asarray(outy), np.asarray(outz)
