"""Perforated-domain geometry: hole shapes in the [1/2, 3/4] shell,
lattice placement of critically scaled holes (size eps^3, spacing eps),
rasterization to penalization masks, and the per-hole cutoff field.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .numerics.grid import StaggeredGrid, face_shape

INNER_SHELL = 0.5
OUTER_SHELL = 0.75


class ShapeSpecError(ValueError):
    """Shape parameters violate the shell bounds."""


class EmptyDomainError(ValueError):
    """No admissible lattice center exists inside the box."""


def fibonacci_directions(n):
    """Deterministic quasi-uniform unit directions for radial sampling."""
    i = np.arange(n) + 0.5
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


@dataclass(frozen=True)
class HoleShape:
    """Star-shaped C^2 obstacle at unit scale, described by its radial
    support function R(direction)."""

    kind: str
    params: tuple
    rotation: tuple = None  # row-major 3x3, optional

    def _rotate(self, dirs):
        if self.rotation is None:
            return dirs
        R = np.asarray(self.rotation).reshape(3, 3)
        return dirs @ R  # R^T applied to each direction

    def support_radius(self, dirs):
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        d = self._rotate(dirs)
        if self.kind == "sphere":
            return np.full(len(d), float(self.params[0]))
        if self.kind == "ellipsoid":
            a = np.asarray(self.params)
            return 1.0 / np.sqrt(np.sum((d / a) ** 2, axis=-1))
        if self.kind == "random-star":
            r0, amps = self.params[0], np.asarray(self.params[1:])
            theta = np.arccos(np.clip(d[:, 2], -1, 1))
            phi = np.arctan2(d[:, 1], d[:, 0])
            # low-order smooth radial perturbation (C^infinity in direction)
            basis = [np.cos(theta) * np.cos(phi) * np.sin(theta),
                     np.sin(theta) * np.sin(phi) * np.cos(theta),
                     np.cos(2 * theta),
                     np.sin(theta) ** 2 * np.cos(2 * phi),
                     np.sin(theta) ** 2 * np.sin(2 * phi),
                     np.sin(2 * theta) * np.cos(phi)]
            pert = sum(a * b for a, b in zip(amps, basis))
            return r0 + pert
        raise ShapeSpecError(f"unknown shape kind {self.kind!r}")

    def contains(self, pts):
        """Points at unit scale, relative to the shape center."""
        pts = np.atleast_2d(pts)
        r = np.linalg.norm(pts, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        R = self.support_radius(pts / safe[:, None])
        return r <= R

    def rotated(self, R):
        Rm = np.asarray(R, dtype=float).reshape(3, 3)
        base = np.eye(3) if self.rotation is None else np.asarray(self.rotation).reshape(3, 3)
        return HoleShape(self.kind, self.params, tuple((Rm @ base).ravel()))

    def max_radius(self, nsample=2048):
        return float(self.support_radius(fibonacci_directions(nsample)).max())

    def cache_key(self):
        rot = () if self.rotation is None else tuple(round(v, 12) for v in self.rotation)
        blob = repr((self.kind, tuple(round(float(v), 12) for v in self.params), rot))
        return hashlib.sha1(blob.encode()).hexdigest()[:16]


def make_hole_shape(spec, seed=0, nsample=10000):
    """Build and validate a HoleShape from a parameter mapping.

    The closed ball of radius 1/2 must lie inside the shape and the shape
    inside the open ball of radius 3/4 (checked by sampling the radial
    support function).
    """
    kind = spec["kind"]
    if kind == "sphere":
        shape = HoleShape("sphere", (float(spec["radius"]),))
    elif kind == "ellipsoid":
        shape = HoleShape("ellipsoid", tuple(float(a) for a in spec["semi_axes"]))
    elif kind == "random-star":
        rng = np.random.default_rng(seed)
        r0 = float(spec.get("r0", 0.625))
        amp = float(spec.get("amplitude", 0.05))
        coeffs = rng.uniform(-1.0, 1.0, size=6)
        coeffs *= amp / max(np.abs(coeffs).sum(), 1e-300)
        shape = HoleShape("random-star", (r0, *coeffs))
    else:
        raise ShapeSpecError(f"unknown shape kind {kind!r}")

    R = shape.support_radius(fibonacci_directions(nsample))
    rmin, rmax = float(R.min()), float(R.max())
    if rmin < INNER_SHELL:
        raise ShapeSpecError(
            f"shape support radius {rmin:.4f} < {INNER_SHELL}: the closed ball "
            f"of radius 1/2 is not contained in the shape")
    if rmax >= OUTER_SHELL:
        raise ShapeSpecError(
            f"shape support radius {rmax:.4f} >= {OUTER_SHELL}: the shape is "
            f"not contained in the open ball of radius 3/4")
    return shape


@dataclass(frozen=True)
class PerforatedDomain:
    """Box minus K(eps) holes T_k = x_k + eps^3 * shape_k on the eps lattice."""

    box_lo: tuple
    box_hi: tuple
    eps: float
    seed: int
    centers: np.ndarray
    shapes: tuple

    @property
    def n_holes(self):
        return len(self.centers)

    @property
    def hole_scale(self):
        return self.eps ** 3

    def hole_contains(self, k, pts):
        rel = (np.atleast_2d(pts) - self.centers[k]) / self.hole_scale
        return self.shapes[k].contains(rel)

    def validate(self):
        """Assert the center-distance and hole-shell invariants."""
        eps = self.eps
        lo, hi = np.asarray(self.box_lo), np.asarray(self.box_hi)
        if self.n_holes == 0:
            return
        d_wall = np.minimum((self.centers - lo).min(), (hi - self.centers).min())
        assert d_wall > eps, "center too close to the boundary"
        if self.n_holes > 1:
            from scipy.spatial import cKDTree
            t = cKDTree(self.centers)
            dist, _ = t.query(self.centers, k=2)
            # lattice neighbours sit at distance exactly eps
            assert float(dist[:, 1].min()) >= eps * (1.0 - 1e-12), "centers closer than eps"
        for k, s in enumerate(self.shapes):
            R = s.support_radius(fibonacci_directions(512))
            assert R.min() >= INNER_SHELL - 1e-12
            assert R.max() < OUTER_SHELL
        # total hole volume bound: K * (4/3) pi ((3/4) eps^3)^3
        bound = self.n_holes * (4.0 / 3.0) * np.pi * (OUTER_SHELL * eps ** 3) ** 3
        box_vol = float(np.prod(hi - lo))
        assert bound < box_vol, "hole volume bound exceeds the box volume"


def build_perforated_domain(box_lo, box_hi, eps, shape_spec, seed=0):
    """Centers on the absolute lattice {eps*(k+1/2)} at distance > eps from
    the boundary; one validated shape per hole (random-star shapes are drawn
    per hole from the seed). Deterministic for fixed inputs."""
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    axes = []
    for d in range(3):
        kmin = int(np.ceil((lo[d] + eps) / eps - 0.5))
        kmax = int(np.floor((hi[d] - eps) / eps - 0.5))
        coords = eps * (np.arange(kmin, kmax + 1) + 0.5)
        coords = coords[(coords - lo[d] > eps) & (hi[d] - coords > eps)]
        axes.append(coords)
    if any(len(a) == 0 for a in axes):
        raise EmptyDomainError(
            f"no lattice point at distance > eps={eps} from the boundary of "
            f"box {tuple(lo)}..{tuple(hi)}")
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    kspec = dict(shape_spec)
    if kspec.get("kind") == "random-star":
        shapes = tuple(make_hole_shape(kspec, seed=seed + 7919 * k)
                       for k in range(len(centers)))
    else:
        one = make_hole_shape(kspec, seed=seed)
        shapes = (one,) * len(centers)
    return PerforatedDomain(tuple(float(v) for v in lo), tuple(float(v) for v in hi),
                            eps, int(seed), centers, shapes)


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

@dataclass
class MaskField:
    """Discrete stand-in for the perforated domain: per-cell classification
    and per-face solid fractions for penalization weighting."""

    grid: StaggeredGrid
    solid: np.ndarray                  # uint8 cells, 1 = solid hole
    face_frac: tuple                   # 3 arrays on faces, in [0, 1]
    resolution_warning: bool = False
    n_holes: int = 0

    def fluid_fraction(self):
        return 1.0 - float(self.solid.mean())


def _sample_offsets(h, nsub):
    """Stratified midpoint offsets spanning a width-h interval."""
    return (np.arange(nsub) + 0.5) / nsub * h - 0.5 * h


def rasterize(domain, grid, nsub=3):
    """Mask for an existing grid: solid cells by center-inside test, face
    fractions by nsub x nsub stratified sampling over each face."""
    solid = np.zeros(grid.shape, dtype=np.uint8)
    fracs = [np.zeros(face_shape(grid, d)) for d in range(3)]
    ccoords = [grid.cell_coords(d) for d in range(3)]
    fcoords = [grid.face_coords(d) for d in range(3)]
    scale = domain.hole_scale
    reach = OUTER_SHELL * scale

    for k in range(domain.n_holes):
        c = domain.centers[k]
        shape = domain.shapes[k]
        # cells: center-in-shape
        rngs = []
        for d in range(3):
            idx = np.nonzero(np.abs(ccoords[d] - c[d]) <= reach + grid.h_of(d).max())[0]
            if len(idx) == 0:
                rngs = None
                break
            rngs.append(idx)
        if rngs is not None:
            pts = np.stack(np.meshgrid(*[ccoords[d][rngs[d]] for d in range(3)],
                                       indexing="ij"), axis=-1)
            inside = shape.contains((pts.reshape(-1, 3) - c) / scale)
            sub = solid[np.ix_(rngs[0], rngs[1], rngs[2])]
            solid[np.ix_(rngs[0], rngs[1], rngs[2])] = np.maximum(
                sub, inside.reshape(pts.shape[:3]).astype(np.uint8))

        # faces: sampled fractions
        for d in range(3):
            coords = [ccoords[0], ccoords[1], ccoords[2]]
            coords[d] = fcoords[d]
            rngs = []
            ok = True
            for e in range(3):
                pad = 0.0 if e == d else grid.h_of(e).max()
                idx = np.nonzero(np.abs(coords[e] - c[e]) <= reach + pad)[0]
                if len(idx) == 0:
                    ok = False
                    break
                rngs.append(idx)
            if not ok:
                continue
            t1, t2 = [e for e in range(3) if e != d]
            h1 = grid.h_of(t1).max()
            h2 = grid.h_of(t2).max()
            off1 = _sample_offsets(h1, nsub)
            off2 = _sample_offsets(h2, nsub)
            base = np.stack(np.meshgrid(*[coords[e][rngs[e]] for e in range(3)],
                                        indexing="ij"), axis=-1)
            acc = np.zeros(base.shape[:3])
            for o1 in off1:
                for o2 in off2:
                    pts = base.copy()
                    pts[..., t1] += o1
                    pts[..., t2] += o2
                    inside = shape.contains((pts.reshape(-1, 3) - c) / scale)
                    acc += inside.reshape(acc.shape)
            acc /= nsub * nsub
            view = fracs[d][np.ix_(rngs[0], rngs[1], rngs[2])]
            fracs[d][np.ix_(rngs[0], rngs[1], rngs[2])] = np.minimum(1.0, view + acc)

    warn = grid.max_h() > domain.eps ** 3 / 4.0
    return MaskField(grid, solid, tuple(fracs), warn, domain.n_holes)


def classify_cells(domain, h):
    """Uniform-grid rasterization at spacing h over the domain's box."""
    if h <= 0:
        raise ValueError("h must be positive")
    lo, hi = np.asarray(domain.box_lo), np.asarray(domain.box_hi)
    n = tuple(max(4, int(round((hi[d] - lo[d]) / h))) for d in range(3))
    grid = StaggeredGrid.box(lo, hi, n)
    return rasterize(domain, grid)


# ---------------------------------------------------------------------------
# cutoff profile chi and the per-hole fields phi_k
# ---------------------------------------------------------------------------

def _hquintic(s):
    return ((-24.0 * s + 60.0) * s - 50.0) * s ** 2 * s + 15.0 * s ** 2


def _hquintic_prime(s):
    return 30.0 * s * (1.0 - s) * (2.0 * s - 1.0) ** 2


def chi(t):
    """C^1 piecewise-quintic bump: 1 on [-3/4, 3/4], supported in (-1, 1),
    monotone transition with zero slope at the transition midpoint."""
    t = np.abs(np.asarray(t, dtype=float))
    s = np.clip((t - 0.75) * 4.0, 0.0, 1.0)
    return 1.0 - _hquintic(s)


def chi_prime(t):
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    s = (a - 0.75) * 4.0
    inside = (s > 0.0) & (s < 1.0)
    out = np.zeros_like(a)
    out[inside] = -4.0 * _hquintic_prime(s[inside])
    return out * np.sign(t)


def cutoff_value(domain, k, x):
    """phi_k(x) = chi(|x - x_k| / eps^3)."""
    if not 0 <= k < domain.n_holes:
        raise IndexError(f"hole index {k} out of range (K={domain.n_holes})")
    r = np.linalg.norm(np.asarray(x, dtype=float) - domain.centers[k])
    return float(chi(r / domain.hole_scale))
