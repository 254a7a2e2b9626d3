"""Independent reference solutions used as oracles by the test suite.

These share no code with the 3D solvers: the obstacle drag oracle is the
closed-form axisymmetric Stokes stream function between concentric spheres
(inner sphere translating at unit speed, outer sphere fixed) evaluated by
1D quadrature; the heat oracle is the exact radial solution of a
two-coefficient conduction problem with a net-zero source.
"""

import numpy as np
from scipy import integrate


def _stream_coeffs(a, b=1.0):
    """f(r) = A/r + B r + C r^2 + D r^4 with f(a)=a^2/2, f'(a)=a,
    f(b)=0, f'(b)=0 (unit translation of the inner sphere)."""
    M = np.array([
        [1.0 / a, a, a * a, a ** 4],
        [-1.0 / a ** 2, 1.0, 2.0 * a, 4.0 * a ** 3],
        [1.0 / b, b, b * b, b ** 4],
        [-1.0 / b ** 2, 1.0, 2.0 * b, 4.0 * b ** 3],
    ])
    rhs = np.array([0.5 * a * a, a, 0.0, 0.0])
    return np.linalg.solve(M, rhs)


def _f(r, c):
    A, B, C, D = c
    return A / r + B * r + C * r * r + D * r ** 4


def _fp(r, c):
    A, B, C, D = c
    return -A / r ** 2 + B + 2 * C * r + 4 * D * r ** 3


def _fpp(r, c):
    A, B, C, D = c
    return 2 * A / r ** 3 + 2 * C + 12 * D * r * r


def concentric_sphere_velocity(a, r, theta, b=1.0):
    """(u_r, u_theta) of the exact solution at radius r, polar angle theta."""
    c = _stream_coeffs(a, b)
    F = 2.0 * _f(r, c) / r ** 2
    G = _fp(r, c) / r
    return np.cos(theta) * F, -np.sin(theta) * G


def concentric_sphere_dirichlet_energy(a, b=1.0, rmax=None):
    """int |grad v|^2 over a < |x| < rmax (default b) for the exact solution.

    This is the drag-matrix diagonal entry for a spherical obstacle of
    radius a inside the unit ball; it approaches the free-space value
    6*pi*a as a -> 0.
    """
    c = _stream_coeffs(a, b)
    rmax = b if rmax is None else rmax

    def integrand(r):
        f, fp, fpp = _f(r, c), _fp(r, c), _fpp(r, c)
        F = 2.0 * f / r ** 2
        Fp = 2.0 * fp / r ** 2 - 4.0 * f / r ** 3
        G = fp / r
        Gp = fpp / r - fp / r ** 2
        return (4.0 * np.pi / 3.0) * (r * r * Fp * Fp + 2.0 * r * r * Gp * Gp
                                      + 4.0 * (F - G) ** 2)

    val, err = integrate.quad(integrand, a, rmax, limit=300, epsabs=1e-12, epsrel=1e-12)
    return val


def concentric_sphere_l2(a, d, b=1.0, what="v"):
    """int over a<|x|<d of |v|^2 ('v'), |grad v|^2 ('grad'), used for the
    decay-law scaling checks."""
    c = _stream_coeffs(a, b)
    if what == "grad":
        def integrand(r):
            f, fp, fpp = _f(r, c), _fp(r, c), _fpp(r, c)
            F = 2.0 * f / r ** 2
            Fp = 2.0 * fp / r ** 2 - 4.0 * f / r ** 3
            G = fp / r
            Gp = fpp / r - fp / r ** 2
            return (4.0 * np.pi / 3.0) * (r * r * Fp * Fp + 2.0 * r * r * Gp * Gp
                                          + 4.0 * (F - G) ** 2)
    else:
        def integrand(r):
            f, fp = _f(r, c), _fp(r, c)
            F = 2.0 * f / r ** 2
            G = fp / r
            # int over angles of |v|^2: cos^2 F^2 + sin^2 G^2
            return r * r * (4.0 * np.pi / 3.0) * (F * F + 2.0 * G * G)

    val, _ = integrate.quad(integrand, a, d, limit=300, epsabs=1e-13, epsrel=1e-12)
    return val


# ---------------------------------------------------------------------------
# radial two-coefficient conduction
# ---------------------------------------------------------------------------

class RadialHeatCase:
    """-div(kappa grad T) = q with kappa = kappa_in for r < a, kappa_out
    outside, and a net-zero radial source supported in r <= b, so T = 0
    identically for r >= b (any outer boundary beyond b is compatible).

    q(r) = amp * (1 - xi^2)(xi^2 - 3/7), xi = r/b  (zero total integral).
    """

    def __init__(self, kappa_in, kappa_out, a, b, amp=10.0):
        assert 0.0 < a < b
        self.kin, self.kout = float(kappa_in), float(kappa_out)
        self.a, self.b, self.amp = float(a), float(b), float(amp)

    def source(self, r):
        r = np.asarray(r, dtype=float)
        xi = r / self.b
        q = self.amp * (1.0 - xi ** 2) * (xi ** 2 - 3.0 / 7.0)
        return np.where(xi <= 1.0, q, 0.0)

    def _flux(self, r):
        """Q(r) = int_0^r q t^2 dt (closed form)."""
        xi = min(r / self.b, 1.0)
        return self.amp * self.b ** 3 / 7.0 * (2.0 * xi ** 5 - xi ** 3 - xi ** 7)

    def kappa(self, r):
        return np.where(np.asarray(r) < self.a, self.kin, self.kout)

    def exact(self, r):
        """T(r) = int_r^b Q(s) / (kappa(s) s^2) ds, elementwise."""
        def integrand(s):
            return self._flux(s) / (float(self.kappa(s)) * s * s)

        def one(rv):
            if rv >= self.b:
                return 0.0
            pts = [p for p in (self.a,) if rv < p < self.b]
            val, _ = integrate.quad(integrand, rv, self.b, points=pts,
                                    limit=200, epsabs=1e-13, epsrel=1e-12)
            return val

        r = np.asarray(r, dtype=float)
        out = np.vectorize(one)(np.maximum(r, 1e-9))
        return out
