"""Effective Brinkman tensor: per-box volume densities of the per-hole drag
matrices, and the small-obstacle extrapolation of the periodic-lattice
tensor.
"""

from dataclasses import dataclass

import numpy as np

from .cell_problem import drag_for


@dataclass
class EffectiveTensorField:
    """Piecewise-constant 3x3 field on a regular partition of the box:
    D_m = (1/|B_m|) * sum over holes with center in B_m of C(eps^3 shape)."""

    box_lo: tuple
    box_hi: tuple
    dims: tuple                 # partition boxes per axis
    tensors: np.ndarray         # (m0, m1, m2, 3, 3)
    counts: np.ndarray          # holes per box

    @property
    def box_volume(self):
        lo, hi = np.asarray(self.box_lo), np.asarray(self.box_hi)
        return float(np.prod((hi - lo) / np.asarray(self.dims)))

    def box_index_of(self, pts):
        lo = np.asarray(self.box_lo)
        hi = np.asarray(self.box_hi)
        dims = np.asarray(self.dims)
        ix = ((np.atleast_2d(pts) - lo) / (hi - lo) * dims).astype(int)
        return np.clip(ix, 0, dims - 1)

    def interior_boxes(self):
        """Boxes not touching the boundary layer of the partition."""
        m = np.zeros(self.dims, dtype=bool)
        if all(d > 2 for d in self.dims):
            m[1:-1, 1:-1, 1:-1] = True
        return m

    def check_spd(self, tol=1e-12):
        for t in self.tensors.reshape(-1, 3, 3):
            if np.abs(t - t.T).max() > tol * max(np.abs(t).max(), 1.0):
                return False
            w = np.linalg.eigvalsh(0.5 * (t + t.T))
            if w.min() < -1e-12 * max(np.trace(t), 1.0):
                return False
        return True

    def cell_field(self, grid):
        """Expand to per-cell 3x3 entries via box lookup (index map only)."""
        idx = [self.box_index_of(
            np.stack([grid.cell_coords(0)[:, None, None] + np.zeros(grid.shape),
                      grid.cell_coords(1)[None, :, None] + np.zeros(grid.shape),
                      grid.cell_coords(2)[None, None, :] + np.zeros(grid.shape)],
                     axis=-1).reshape(-1, 3))]
        return idx[0].reshape(grid.shape + (3,))

    def serialize(self, path):
        with open(path, "w") as f:
            f.write(f"# effective-tensor {self.dims[0]} {self.dims[1]} {self.dims[2]}\n")
            f.write(f"# box {self.box_lo!r} {self.box_hi!r}\n")
            for m, t in enumerate(self.tensors.reshape(-1, 3, 3)):
                entries = " ".join(repr(float(v)) for v in t.ravel())
                f.write(f"{m} {entries}\n")


class TensorAssemblyError(RuntimeError):
    pass


def assemble_effective_tensor(domain, dims, cache=None, resolution=128,
                              allow_solve=True):
    """D_m = (1/|B_m|) sum_{x_k in B_m} C(eps^3 * shape_k); holes are
    assigned to boxes by center location. Identical shapes share one cached
    drag matrix (the per-box sum is count * C, exactly)."""
    dims = tuple(int(v) for v in dims)
    lo, hi = np.asarray(domain.box_lo), np.asarray(domain.box_hi)
    vol = float(np.prod((hi - lo) / np.asarray(dims)))
    tensors = np.zeros(dims + (3, 3))
    counts = np.zeros(dims, dtype=int)
    field = EffectiveTensorField(domain.box_lo, domain.box_hi, dims, tensors, counts)
    if domain.n_holes == 0:
        return field

    s = domain.hole_scale
    groups = {}
    for k, shape in enumerate(domain.shapes):
        groups.setdefault(shape.cache_key(), (shape, []))[1].append(k)

    ix = field.box_index_of(domain.centers)
    for key, (shape, ks) in groups.items():
        C = drag_for(shape, s, resolution=resolution, cache=cache,
                     allow_solve=allow_solve)
        per_box = np.zeros(dims, dtype=int)
        np.add.at(per_box, (ix[ks, 0], ix[ks, 1], ix[ks, 2]), 1)
        tensors += (per_box[..., None, None].astype(float) * C) / vol
        counts += per_box
    return field


@dataclass
class ExtrapolationReport:
    s_values: list
    tensors: list             # C(s*shape)/s per s
    extrapolated: np.ndarray
    fit_residual: float
    reliable: bool


def periodic_effective_tensor(shape, s_values, cache=None, resolution=128,
                              allow_solve=True):
    """Limit tensor of the uniform lattice: extrapolate D(s) = C(s*shape)/s
    to s -> 0 with a linear-in-s Richardson fit over the given decreasing
    sequence. Flags the fit unreliable when the entrywise trend is not
    monotone."""
    s_values = [float(s) for s in s_values]
    if not all(a > b for a, b in zip(s_values, s_values[1:])):
        raise ValueError("s sequence must be strictly decreasing")
    Ds = []
    for s in s_values:
        C = drag_for(shape, s, resolution=resolution, cache=cache,
                     allow_solve=allow_solve)
        Ds.append(C / s)
    # entrywise least-squares linear fit in s, evaluated at s = 0
    A = np.stack([np.ones(len(s_values)), np.asarray(s_values)], axis=1)
    y = np.stack([d.ravel() for d in Ds], axis=0)
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    D_inf = coef[0].reshape(3, 3)
    D_inf = 0.5 * (D_inf + D_inf.T)
    fit_res = float(np.sqrt(res.sum())) if len(res) else 0.0

    reliable = True
    diffs = np.stack([Ds[i] - Ds[i + 1] for i in range(len(Ds) - 1)], axis=0)
    diag_trend = np.einsum("nii->ni", diffs)
    if len(Ds) >= 3 and (np.sign(diag_trend[0]) != np.sign(diag_trend[-1])).any():
        reliable = False
    return D_inf, ExtrapolationReport(s_values, Ds, D_inf, fit_res, reliable)
