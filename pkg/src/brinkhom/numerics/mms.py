"""Manufactured solutions for order-of-accuracy verification.

Velocity fields come from a curl (exactly divergence-free) and vanish with
all components on the box walls; forcings are derived symbolically.
"""

from functools import lru_cache

import numpy as np
import sympy as sym


@lru_cache(maxsize=None)
def stokes_case(lx=1.0, ly=1.0, lz=1.0, mu=1.0):
    """Divergence-free (u, p) with zero wall values and the forcing
    f = -div(mu (grad u + grad u^T)) + grad p for constant mu."""
    x, y, z = sym.symbols("x y z")
    L = (lx, ly, lz)
    S = (sym.sin(sym.pi * x / lx) ** 2 * sym.sin(sym.pi * y / ly) ** 2
         * sym.sin(sym.pi * z / lz) ** 2)
    c = (1.0, -0.7, 0.4)
    # u = grad(S) x c
    gS = [sym.diff(S, v) for v in (x, y, z)]
    u = [gS[1] * c[2] - gS[2] * c[1],
         gS[2] * c[0] - gS[0] * c[2],
         gS[0] * c[1] - gS[1] * c[0]]
    p = sym.cos(sym.pi * x / lx) * sym.cos(2 * sym.pi * y / ly) * sym.cos(sym.pi * z / lz)
    f = []
    for i, v in enumerate((x, y, z)):
        lap = sum(sym.diff(u[i], w, 2) for w in (x, y, z))
        f.append(-mu * lap + sym.diff(p, v))
    lam = lambda e: sym.lambdify((x, y, z), e, "numpy")
    return {"u": [lam(e) for e in u], "p": lam(p), "f": [lam(e) for e in f]}


@lru_cache(maxsize=None)
def heat_case(lx=1.0, ly=1.0, lz=1.0, kappa=1.0):
    """Theta vanishing on the walls and q = -kappa * Delta Theta."""
    x, y, z = sym.symbols("x y z")
    th = (sym.sin(sym.pi * x / lx) * sym.sin(2 * sym.pi * y / ly)
          * sym.sin(sym.pi * z / lz)
          + 0.5 * sym.sin(2 * sym.pi * x / lx) * sym.sin(sym.pi * y / ly)
          * sym.sin(2 * sym.pi * z / lz))
    q = -kappa * sum(sym.diff(th, w, 2) for w in (x, y, z))
    lam = lambda e: sym.lambdify((x, y, z), e, "numpy")
    return {"theta": lam(th), "q": lam(q)}


def eval_on(mesh, fn):
    X, Y, Z = mesh
    return np.asarray(fn(X, Y, Z)) + np.zeros(np.broadcast_shapes(X.shape, Y.shape, Z.shape))


def observed_orders(hs, errs):
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    return list(np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:]))
