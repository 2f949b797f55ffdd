"""Slab geometry, tensor grids, and transport directions.

The medium occupies the rectangle ``Omega = (-B, B) x (a, b)`` with
``0 < a < b``.  Point sources sit on the segment ``z = 0``,
``x1 in [-d, d]``, and every source-to-detector ray travels upward through
the source-free gap ``0 < z < a``.  Computations that follow a ray from its
source need the taller rectangle ``P = (-Bbar, Bbar) x (0, b)`` with
``Bbar = max(B, d)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError


class DegenerateDirectionError(UsageError):
    """The evaluation point coincides with the source point."""


@dataclass(frozen=True)
class Geometry:
    """Slab extents and source-segment half-width, all in shared length units."""

    half_width: float = 0.5
    slab_bottom: float = 1.0
    slab_top: float = 2.0
    source_half_width: float = 0.5

    def __post_init__(self):
        if not (self.half_width > 0 and self.source_half_width > 0):
            raise UsageError("half widths must be positive")
        if not (0 < self.slab_bottom < self.slab_top):
            raise UsageError("need 0 < slab_bottom < slab_top")

    @property
    def reach(self):
        """Half-width of the hull rectangle P, max(half_width, source_half_width)."""
        return max(self.half_width, self.source_half_width)


def _uniform_span(lo, hi, h, label):
    """Closed uniform nodes on [lo, hi]; the span must be a multiple of h."""
    n = (hi - lo) / h
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise UsageError(f"{label} span {hi - lo!r} is not a multiple of step {h!r}")
    return np.linspace(lo, hi, round(n) + 1)


@dataclass(frozen=True, eq=False)
class GridSet:
    """Closed uniform tensor grids over Omega, P, and the source segment.

    ``x1`` / ``z`` are the medium-rectangle nodes (both endpoints included),
    ``x1_hull`` / ``z_hull`` the hull-rectangle nodes, and ``alpha`` the
    source abscissae.  The medium nodes are an exact sub-block of the hull
    nodes starting at offsets ``(ix0, jz0)``.
    """

    geometry: Geometry
    x1: np.ndarray
    z: np.ndarray
    x1_hull: np.ndarray
    z_hull: np.ndarray
    alpha: np.ndarray
    h_x1: float
    h_z: float
    h_alpha: float

    @classmethod
    def uniform(cls, geometry, h):
        """Build all grids with the single step ``h`` on every axis."""
        if h <= 0:
            raise UsageError("grid step must be positive")
        g = geometry
        grids = cls(
            geometry=g,
            x1=_uniform_span(-g.half_width, g.half_width, h, "x1"),
            z=_uniform_span(g.slab_bottom, g.slab_top, h, "z"),
            x1_hull=_uniform_span(-g.reach, g.reach, h, "hull x1"),
            z_hull=_uniform_span(0.0, g.slab_top, h, "hull z"),
            alpha=_uniform_span(-g.source_half_width, g.source_half_width, h, "alpha"),
            h_x1=h,
            h_z=h,
            h_alpha=h,
        )
        return grids

    def __post_init__(self):
        for name in ("x1", "z", "x1_hull", "z_hull", "alpha"):
            nodes = getattr(self, name)
            if nodes.ndim != 1 or nodes.size < 2:
                raise UsageError(f"{name} nodes must be a 1D array with >= 2 entries")
            step = getattr(self, "h_" + ("x1" if "x1" in name else "alpha" if name == "alpha" else "z"))
            if not np.allclose(np.diff(nodes), step, rtol=0, atol=1e-9):
                raise UsageError(f"{name} nodes are not uniform with the declared step")
        if self.ix0 < 0 or self.jz0 < 0:
            raise UsageError("medium grid does not sit inside the hull grid")
        sub = self.x1_hull[self.ix0 : self.ix0 + self.x1.size]
        if sub.size != self.x1.size or not np.allclose(sub, self.x1, atol=1e-9):
            raise UsageError("medium x1 nodes misaligned with hull nodes")
        sub = self.z_hull[self.jz0 : self.jz0 + self.z.size]
        if sub.size != self.z.size or not np.allclose(sub, self.z, atol=1e-9):
            raise UsageError("medium z nodes misaligned with hull nodes")

    @property
    def ix0(self):
        """x-offset of the medium block inside the hull grid."""
        return round((self.x1[0] - self.x1_hull[0]) / self.h_x1)

    @property
    def jz0(self):
        """z-offset of the medium block inside the hull grid."""
        return round((self.z[0] - self.z_hull[0]) / self.h_z)

    @property
    def shape_medium(self):
        return (self.x1.size, self.z.size, self.alpha.size)

    @property
    def shape_hull(self):
        return (self.x1_hull.size, self.z_hull.size, self.alpha.size)

    def shape(self, region):
        if region == "medium":
            return self.shape_medium
        if region == "hull":
            return self.shape_hull
        raise UsageError(f"unknown region {region!r}")

    def spatial_mesh(self, region="medium"):
        """Meshgrid (ij indexing) of the spatial nodes of ``region``."""
        if region == "medium":
            return np.meshgrid(self.x1, self.z, indexing="ij")
        return np.meshgrid(self.x1_hull, self.z_hull, indexing="ij")


@dataclass(eq=False)
class RadianceField:
    """Nodal samples of a directional field u(x, alpha) on one of the grids."""

    values: np.ndarray
    grid: GridSet
    region: str = "hull"

    def __post_init__(self):
        expected = self.grid.shape(self.region)
        if self.values.shape != expected:
            raise UsageError(
                f"field shape {self.values.shape} does not match {self.region} grid {expected}"
            )
        if not np.all(np.isfinite(self.values)):
            raise UsageError("field contains non-finite entries")

    def medium_view(self):
        """The Omega-block of the samples (a view when region is 'hull')."""
        if self.region == "medium":
            return self.values
        g = self.grid
        return self.values[g.ix0 : g.ix0 + g.x1.size, g.jz0 : g.jz0 + g.z.size, :]


def direction_vector(x, alpha):
    """Unit vector from the source (alpha, 0) to the point ``x = (x1, z)``."""
    dx = x[0] - alpha
    dz = x[1]
    r = np.hypot(dx, dz)
    if r == 0.0:
        raise DegenerateDirectionError(f"point {x!r} coincides with source ({alpha!r}, 0)")
    return np.array([dx / r, dz / r])


def direction_alpha_derivative(x, alpha):
    """Derivative of ``direction_vector(x, alpha)`` in the source abscissa.

    With r = |x - x_alpha| the components are (-z^2 / r^3, z (x1 - alpha) / r^3).
    """
    dx = x[0] - alpha
    dz = x[1]
    r = np.hypot(dx, dz)
    if r == 0.0:
        raise DegenerateDirectionError(f"point {x!r} coincides with source ({alpha!r}, 0)")
    return np.array([-dz * dz / r**3, dz * dx / r**3])


def direction_tables(grid):
    """Direction components and their alpha-derivatives on the medium grid.

    Returns four arrays of shape (n_x1, n_z, n_alpha): nu1, nu2, dnu1, dnu2.
    Every medium node has z >= slab_bottom > 0, so no ray is degenerate.
    """
    x1 = grid.x1[:, None, None]
    z = grid.z[None, :, None]
    alpha = grid.alpha[None, None, :]
    dx = x1 - alpha
    r = np.sqrt(dx * dx + z * z)
    nu1 = dx / r
    nu2 = z / r + np.zeros_like(dx)
    dnu1 = -z * z / r**3 + np.zeros_like(dx)
    dnu2 = z * dx / r**3
    return nu1, nu2, dnu1, dnu2


def carleman_weight(z, lam):
    """Pointwise weight exp(2 lam z^2); grows fast, so callers usually
    work with ratios against exp(2 lam b^2) instead of raw values."""
    z = np.asarray(z, dtype=float)
    return np.exp(2.0 * lam * z * z)


def trapezoid_weights(n, h):
    """Composite trapezoid weights for n closed uniform nodes of step h."""
    if n < 2:
        raise UsageError("trapezoid rule needs at least two nodes")
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def alpha_quadrature(values, h, axis=-1):
    """Trapezoid integral of nodal samples along the source-abscissa axis."""
    values = np.asarray(values)
    w = trapezoid_weights(values.shape[axis], h)
    return np.tensordot(values, w, axes=([axis], [0]))


def line_quadrature(x, alpha, n_samples):
    """Uniform samples and trapezoid weights along the segment from the
    source (alpha, 0) to ``x``.

    Returns (points, weights) with points of shape (n_samples, 2); the
    weights sum to the segment length.
    """
    if n_samples < 2:
        raise UsageError("need at least two samples along a ray")
    dx = x[0] - alpha
    dz = x[1]
    length = float(np.hypot(dx, dz))
    if length == 0.0:
        raise DegenerateDirectionError(f"point {x!r} coincides with source ({alpha!r}, 0)")
    t = np.linspace(0.0, 1.0, n_samples)
    points = np.column_stack((alpha + t * dx, t * dz))
    return points, trapezoid_weights(n_samples, length / (n_samples - 1))
