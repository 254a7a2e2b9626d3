"""Staggered (MAC) grids and field containers.

Cell-centred scalars, face-centred vector components. Grids are tensor
products; spacing may vary per axis (graded grids for the obstacle cell
problem use this). Velocity arrays include the wall faces, which are
pinned to zero throughout.
"""

from dataclasses import dataclass, field

import numpy as np


def _axis_spacings(extent, n, stretch):
    if stretch is None:
        return np.full(n, extent / n)
    t = np.linspace(-1.0, 1.0, n + 1)
    xf = np.sinh(stretch * t) / np.sinh(stretch)  # in [-1, 1], clustered at 0
    xf = (xf + 1.0) * 0.5 * extent
    return np.diff(xf)


@dataclass(frozen=True)
class StaggeredGrid:
    """Tensor-product MAC grid over an axis-aligned box."""

    lo: tuple
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray

    def __post_init__(self):
        for h in (self.hx, self.hy, self.hz):
            if h.ndim != 1 or len(h) < 4:
                raise ValueError("need at least 4 cells per axis")
            if np.any(h <= 0):
                raise ValueError("cell widths must be positive")

    @classmethod
    def box(cls, lo, hi, n, stretch=None):
        """Grid on [lo, hi] with n=(nx,ny,nz) cells; optional sinh grading."""
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        n = tuple(int(v) for v in n)
        st = stretch if isinstance(stretch, (tuple, list)) else (stretch,) * 3
        hs = [_axis_spacings(hi[d] - lo[d], n[d], st[d]) for d in range(3)]
        return cls(lo, hs[0], hs[1], hs[2])

    @property
    def shape(self):
        return (len(self.hx), len(self.hy), len(self.hz))

    @property
    def extent(self):
        return (float(self.hx.sum()), float(self.hy.sum()), float(self.hz.sum()))

    @property
    def hi(self):
        e = self.extent
        return tuple(self.lo[d] + e[d] for d in range(3))

    @property
    def uniform(self):
        return all(np.ptp(h) < 1e-13 * h[0] for h in (self.hx, self.hy, self.hz))

    def h_of(self, axis):
        return (self.hx, self.hy, self.hz)[axis]

    def face_gaps(self, axis):
        """Distances between neighbouring cell centres, half-cell at walls."""
        h = self.h_of(axis)
        d = np.empty(len(h) + 1)
        d[1:-1] = 0.5 * (h[:-1] + h[1:])
        d[0] = 0.5 * h[0]
        d[-1] = 0.5 * h[-1]
        return d

    def face_coords(self, axis):
        h = self.h_of(axis)
        x = np.concatenate(([0.0], np.cumsum(h))) + self.lo[axis]
        return x

    def cell_coords(self, axis):
        xf = self.face_coords(axis)
        return 0.5 * (xf[:-1] + xf[1:])

    def min_h(self):
        return min(float(h.min()) for h in (self.hx, self.hy, self.hz))

    def max_h(self):
        return max(float(h.max()) for h in (self.hx, self.hy, self.hz))

    # --- positions of the four DOF families -------------------------------
    def cell_mesh(self):
        return np.ix_(self.cell_coords(0), self.cell_coords(1), self.cell_coords(2))

    def face_mesh(self, axis):
        cs = [self.cell_coords(d) for d in range(3)]
        cs[axis] = self.face_coords(axis)
        return np.ix_(*cs)

    def edge_mesh(self, a, b):
        """Edge family where the cross strain du_a/db + du_b/da lives."""
        cs = [self.cell_coords(d) for d in range(3)]
        cs[a] = self.face_coords(a)
        cs[b] = self.face_coords(b)
        return np.ix_(*cs)

    # --- separable integration weights ------------------------------------
    def cell_axis_weights(self):
        return (self.hx, self.hy, self.hz)

    def face_axis_weights(self, axis):
        ws = [self.hx, self.hy, self.hz]
        ws[axis] = self.face_gaps(axis)
        return tuple(ws)

    def integrate_cells(self, q):
        wx, wy, wz = self.cell_axis_weights()
        return float(np.einsum("ijk,i,j,k->", q, wx, wy, wz))

    def integrate_faces(self, q, axis):
        wx, wy, wz = self.face_axis_weights(axis)
        return float(np.einsum("ijk,i,j,k->", q, wx, wy, wz))

    def dot_cells(self, p, q):
        wx, wy, wz = self.cell_axis_weights()
        return float(np.einsum("ijk,ijk,i,j,k->", p, q, wx, wy, wz))

    def dot_faces(self, u, v, axis):
        wx, wy, wz = self.face_axis_weights(axis)
        return float(np.einsum("ijk,ijk,i,j,k->", u, v, wx, wy, wz))

    def cell_volumes(self):
        return np.einsum("i,j,k->ijk", self.hx, self.hy, self.hz)

    def face_volumes(self, axis):
        wx, wy, wz = self.face_axis_weights(axis)
        return np.einsum("i,j,k->ijk", wx, wy, wz)


def face_shape(grid, axis):
    s = list(grid.shape)
    s[axis] += 1
    return tuple(s)


@dataclass
class ScalarField:
    """Cell-centred scalar with its grid."""

    grid: StaggeredGrid
    data: np.ndarray = None

    def __post_init__(self):
        if self.data is None:
            self.data = np.zeros(self.grid.shape)
        if self.data.shape != self.grid.shape:
            raise ValueError("scalar data does not match grid")

    def check_finite(self):
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite values in scalar field")

    def copy(self):
        return ScalarField(self.grid, self.data.copy())


@dataclass
class VectorField:
    """Face-centred vector components; wall faces are zero."""

    grid: StaggeredGrid
    x: np.ndarray = None
    y: np.ndarray = None
    z: np.ndarray = None

    def __post_init__(self):
        if self.x is None:
            self.x = np.zeros(face_shape(self.grid, 0))
            self.y = np.zeros(face_shape(self.grid, 1))
            self.z = np.zeros(face_shape(self.grid, 2))
        for d, a in enumerate(self.components):
            if a.shape != face_shape(self.grid, d):
                raise ValueError("vector data does not match grid")

    @property
    def components(self):
        return (self.x, self.y, self.z)

    def check_finite(self):
        if not all(np.all(np.isfinite(a)) for a in self.components):
            raise ValueError("non-finite values in vector field")

    def copy(self):
        return VectorField(self.grid, self.x.copy(), self.y.copy(), self.z.copy())

    def zero_walls(self):
        self.x[0] = 0.0
        self.x[-1] = 0.0
        self.y[:, 0] = 0.0
        self.y[:, -1] = 0.0
        self.z[:, :, 0] = 0.0
        self.z[:, :, -1] = 0.0
        return self

    def max_abs(self):
        return max(float(np.abs(a).max()) for a in self.components)
