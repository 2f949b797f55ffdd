"""Forward transport: ballistic field, scattering operator, and solvers.

The steady radiance u(x, alpha) for the source at (alpha, 0) satisfies the
integral fixed point u = u0 + K u, where u0 is the attenuated ballistic
term of the mollified point source and K attenuates and accumulates the
in-scattered radiance along the ray from the source to x.  The kernel of K
couples source abscissae through a wrapped Henyey-Greenstein factor over
the finite source aperture.

Two solvers are provided: damped-free fixed-point sweeps (production) and
a dense collocation solve of the same discretization (oracle for small
grids).  Both share the ray quadrature of :mod:`rtetomo._march`.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad

from . import _march
from .errors import ForwardConvergenceError, UsageError
from .geometry import RadianceField, trapezoid_weights

_PROFILE_TABLE_N = 8193


def _bump(t):
    return np.exp(t * t / (t * t - 1.0))


@dataclass(frozen=True, eq=False)
class SourceModel:
    """Radially symmetric bump source of radius ``sigma``, unit total mass.

    ``profile_integral`` is the line integral of the bump through its
    center (the un-attenuated on-axis ballistic amplitude); ``s_nodes`` /
    ``cumulative`` tabulate the partial line integral used for evaluation
    points inside the support.
    """

    sigma: float
    norm_constant: float
    profile_integral: float
    s_nodes: np.ndarray
    cumulative: np.ndarray

    @classmethod
    def build(cls, sigma):
        if sigma <= 0:
            raise UsageError("source radius must be positive")
        radial_mass = quad(lambda t: t * _bump(t), 0.0, 1.0)[0]
        norm = 1.0 / (2.0 * np.pi * sigma * sigma * radial_mass)
        t = np.linspace(0.0, 1.0, _PROFILE_TABLE_N)
        profile = np.zeros_like(t)
        profile[:-1] = norm * _bump(t[:-1])
        s = sigma * t
        cum = np.concatenate([[0.0], cumulative_trapezoid(profile, s)])
        return cls(
            sigma=float(sigma),
            norm_constant=float(norm),
            profile_integral=float(cum[-1]),
            s_nodes=s,
            cumulative=cum,
        )


def source_value(x, alpha, source):
    """Pointwise source density at ``x = (..., 2)`` for abscissa ``alpha``."""
    x = np.asarray(x, dtype=float)
    dx = x[..., 0] - alpha
    dz = x[..., 1]
    r2 = dx * dx + dz * dz
    s2 = source.sigma * source.sigma
    out = np.zeros_like(r2)
    m = r2 < s2
    out[m] = source.norm_constant * np.exp(r2[m] / (r2[m] - s2))
    return out


def partial_profile_integral(ell, source):
    """Line integral of the bump profile over [0, ell]; saturates at
    ``profile_integral`` once ell covers the support."""
    return np.interp(ell, source.s_nodes, source.cumulative)


@dataclass(frozen=True)
class KernelModel:
    """Henyey-Greenstein coupling between source abscissae.

    ``anisotropy`` is the HG shape parameter; ``aperture_half_width`` sets
    the 1/(2d) normalization over the source segment [-d, d].
    """

    anisotropy: float = 0.5
    aperture_half_width: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.anisotropy < 1.0:
            raise UsageError("anisotropy must lie in [0, 1)")
        if self.aperture_half_width <= 0:
            raise UsageError("aperture half width must be positive")


def kernel_value(alpha, beta, kernel):
    """Coupling weight between abscissae alpha (receiver) and beta (donor)."""
    g = kernel.anisotropy
    den = 1.0 + g * g - 2.0 * g * np.cos(np.asarray(alpha) - np.asarray(beta))
    return (1.0 - g * g) / (2.0 * kernel.aperture_half_width * den)


def kernel_alpha_derivative(alpha, beta, kernel):
    """Derivative of :func:`kernel_value` in the receiver abscissa."""
    g = kernel.anisotropy
    diff = np.asarray(alpha) - np.asarray(beta)
    den = 1.0 + g * g - 2.0 * g * np.cos(diff)
    return -(1.0 - g * g) * g * np.sin(diff) / (kernel.aperture_half_width * den * den)


def kernel_matrix(kernel, alpha_nodes):
    """Dense (receiver, donor) coupling table on the abscissa nodes."""
    return kernel_value(np.asarray(alpha_nodes)[:, None], np.asarray(alpha_nodes)[None, :], kernel)


def scatter_matrix(kernel, alpha_nodes, h_alpha):
    """Coupling table with trapezoid quadrature weights folded in, so the
    aperture integral of G(alpha, .) f(.) is ``scatter_matrix @ f``."""
    w = trapezoid_weights(len(alpha_nodes), h_alpha)
    return kernel_matrix(kernel, alpha_nodes) * w[None, :]


def scatter_alpha_derivative_matrix(kernel, alpha_nodes, h_alpha):
    """Receiver-derivative counterpart of :func:`scatter_matrix`."""
    a = np.asarray(alpha_nodes)
    w = trapezoid_weights(len(a), h_alpha)
    return kernel_alpha_derivative(a[:, None], a[None, :], kernel) * w[None, :]


def default_ds(grid):
    """Default ray-march step: half the smaller spatial grid step."""
    return 0.5 * min(grid.h_x1, grid.h_z)


def _ray_samples(x1t, zt, alpha, grid, ds_target):
    """Sample arclengths and positions for one ray, mirroring the kernels.

    Returns (s, px, pz, ds); empty arrays when the target is at or below
    the medium floor.
    """
    floor = grid.geometry.slab_bottom
    if zt <= floor + 1e-12:
        return np.empty(0), np.empty(0), np.empty(0), 0.0
    dxr = x1t - alpha
    ell = float(np.hypot(dxr, zt))
    s_a = ell * (floor / zt)
    seg = ell - s_a
    m_cnt = max(int(np.ceil(seg / ds_target)) + 1, 2)
    ds = seg / (m_cnt - 1)
    s = s_a + ds * np.arange(m_cnt)
    tpar = s / ell
    return s, alpha + tpar * dxr, tpar * zt, ds


def _bilinear_medium(px, pz, values, grid):
    """Bilinear samples of a medium-grid nodal array; zero outside the
    medium x-range (where all media vanish)."""
    n1, nz = values.shape[:2]
    fx = (px - grid.x1[0]) / grid.h_x1
    inside = (fx >= -1e-9) & (fx <= (n1 - 1) + 1e-9)
    ix = np.clip(np.floor(fx).astype(np.int64), 0, n1 - 2)
    wx = np.clip(fx - ix, 0.0, 1.0)
    fz = (pz - grid.z[0]) / grid.h_z
    iz = np.clip(np.floor(fz).astype(np.int64), 0, nz - 2)
    wz = np.clip(fz - iz, 0.0, 1.0)
    out = (
        (1.0 - wx) * (1.0 - wz) * values[ix, iz]
        + wx * (1.0 - wz) * values[ix + 1, iz]
        + (1.0 - wx) * wz * values[ix, iz + 1]
        + wx * wz * values[ix + 1, iz + 1]
    )
    return np.where(inside, out, 0.0)


def attenuation_integral(x, alpha, phantom, grid, ds_target=None):
    """Beer-Lambert factor c(x, alpha) = exp(int of attenuation along the
    ray), >= 1; equals 1 when the ray never meets the medium."""
    ds_target = ds_target or default_ds(grid)
    s, px, pz, ds = _ray_samples(x[0], x[1], alpha, grid, ds_target)
    if s.size == 0:
        return 1.0
    a_s = _bilinear_medium(px, pz, phantom.medium_block("attenuation"), grid)
    inc = 0.5 * ds * (a_s[1:] + a_s[:-1])
    return float(np.exp(inc.sum()))


def _hull_targets(grid):
    x, z = grid.spatial_mesh("hull")
    return x.ravel(), z.ravel()


def _ballistic_hull(phantom, source, grid, backend, ds_target):
    """u0 and c on all hull nodes, flat (n_hull, n_alpha) arrays."""
    tx, tz = _hull_targets(grid)
    atten = np.ascontiguousarray(phantom.medium_block("attenuation"))
    vzero = np.zeros(atten.shape + (grid.alpha.size,))
    _, c = _march.sweep(
        tx, tz, grid.alpha, atten, vzero,
        grid.x1[0], grid.h_x1, grid.z[0], grid.h_z,
        grid.geometry.slab_bottom, ds_target, backend=backend,
    )
    ell = np.hypot(tx[:, None] - grid.alpha[None, :], tz[:, None])
    amplitude = partial_profile_integral(np.minimum(ell, source.sigma), source)
    return amplitude / c, c


def u0_field(phantom, source, grid, backend=None, ds_target=None):
    """Ballistic (unscattered) radiance on the hull grid."""
    ds_target = ds_target or default_ds(grid)
    u0, _ = _ballistic_hull(phantom, source, grid, backend, ds_target)
    return RadianceField(u0.reshape(grid.shape_hull), grid, "hull")


def scatter_apply(field, phantom, kernel, backend=None, ds_target=None):
    """One application of the scattering operator K to a hull-grid field."""
    grid = field.grid
    ds_target = ds_target or default_ds(grid)
    w = scatter_matrix(kernel, grid.alpha, grid.h_alpha)
    mu_s = phantom.medium_block("mu_s")
    vsrc = mu_s[:, :, None] * (field.medium_view() @ w.T)
    tx, tz = _hull_targets(grid)
    scat, _ = _march.sweep(
        tx, tz, grid.alpha, np.ascontiguousarray(phantom.medium_block("attenuation")), vsrc,
        grid.x1[0], grid.h_x1, grid.z[0], grid.h_z,
        grid.geometry.slab_bottom, ds_target, backend=backend,
    )
    return RadianceField(scat.reshape(grid.shape_hull), grid, "hull")


def _outside_medium_targets(grid):
    """Hull nodes above the floor but outside the medium x-range (present
    only when the source segment is wider than the medium)."""
    x, z = grid.spatial_mesh("hull")
    cols = np.ones(grid.x1_hull.size, dtype=bool)
    cols[grid.ix0 : grid.ix0 + grid.x1.size] = False
    pick = cols[:, None] & (z > grid.geometry.slab_bottom + 1e-12)
    return x[pick], z[pick], pick


def solve_forward(
    phantom,
    source,
    kernel,
    grid,
    tol=1e-10,
    max_iters=200,
    ds_target=None,
    backend=None,
    return_info=False,
):
    """Iterate u <- u0 + K u on the medium nodes until the sweep update
    falls below ``tol`` (relative to the field's max).

    The operator K is monotone, so the iterates increase pointwise from u0
    and converge whenever the scattering albedo stays subcritical; a
    non-contracting tail raises :class:`ForwardConvergenceError`.  Returns
    the hull-grid radiance (and an info dict with the sweep history when
    ``return_info`` is set).
    """
    ds_target = ds_target or default_ds(grid)
    u0_flat, _ = _ballistic_hull(phantom, source, grid, backend, ds_target)
    u = u0_flat.reshape(grid.shape_hull).copy()
    med = (
        slice(grid.ix0, grid.ix0 + grid.x1.size),
        slice(grid.jz0, grid.jz0 + grid.z.size),
        slice(None),
    )
    u0_med = u[med].copy()
    atten = np.ascontiguousarray(phantom.medium_block("attenuation"))
    mu_s = phantom.medium_block("mu_s")
    w = scatter_matrix(kernel, grid.alpha, grid.h_alpha)
    xm, zm = grid.spatial_mesh("medium")
    txm, tzm = xm.ravel(), zm.ravel()

    diffs = []
    for _ in range(max_iters):
        vsrc = mu_s[:, :, None] * (u[med] @ w.T)
        scat, _ = _march.sweep(
            txm, tzm, grid.alpha, atten, vsrc,
            grid.x1[0], grid.h_x1, grid.z[0], grid.h_z,
            grid.geometry.slab_bottom, ds_target, backend=backend,
        )
        new = u0_med + scat.reshape(u0_med.shape)
        diff = float(np.max(np.abs(new - u[med])))
        if not np.isfinite(diff):
            raise ForwardConvergenceError("fixed-point sweep diverged", last_diff=diff)
        u[med] = new
        diffs.append(diff)
        if diff <= tol * max(1.0, float(np.max(new))):
            break
    else:
        raise ForwardConvergenceError(
            f"no convergence in {max_iters} sweeps (last update {diffs[-1]:.3e})",
            last_diff=diffs[-1],
        )

    _fill_outside_medium(u, phantom, kernel, grid, ds_target, backend, w, mu_s, atten, med)
    field = RadianceField(u, grid, "hull")
    if return_info:
        return field, {"sweeps": len(diffs), "diffs": diffs, "ds": ds_target}
    return field


def _fill_outside_medium(u, phantom, kernel, grid, ds_target, backend, w, mu_s, atten, med):
    """Scatter onto hull nodes beside the medium (no-op when the hull and
    medium share the x-range); those nodes receive but never donate."""
    tx, tz, pick = _outside_medium_targets(grid)
    if tx.size == 0:
        return
    vsrc = mu_s[:, :, None] * (u[med] @ w.T)
    scat, _ = _march.sweep(
        tx, tz, grid.alpha, atten, vsrc,
        grid.x1[0], grid.h_x1, grid.z[0], grid.h_z,
        grid.geometry.slab_bottom, ds_target, backend=backend,
    )
    u[pick] += scat


def solve_forward_direct(phantom, source, kernel, grid, cap=10000, ds_target=None, return_info=False):
    """Dense collocation solve of the same discretization, for small grids.

    Assembles (I - S) u = u0 over all medium nodes and abscissae with S the
    exact matrix of one marching sweep, then solves with LAPACK.  Refuses
    more than ``cap`` unknowns.
    """
    ds_target = ds_target or default_ds(grid)
    n1, nz, nk = grid.shape_medium
    n_unknown = n1 * nz * nk
    if n_unknown > cap:
        raise UsageError(f"{n_unknown} unknowns exceed the dense-solver cap {cap}")
    atten = phantom.medium_block("attenuation")
    mu_s = phantom.medium_block("mu_s")
    w = scatter_matrix(kernel, grid.alpha, grid.h_alpha)

    u0_flat, _ = _ballistic_hull(phantom, source, grid, None, ds_target)
    u0_hull = u0_flat.reshape(grid.shape_hull)
    med = (
        slice(grid.ix0, grid.ix0 + n1),
        slice(grid.jz0, grid.jz0 + nz),
        slice(None),
    )
    rhs = u0_hull[med].reshape(n_unknown)

    smat = np.zeros((n_unknown, n_unknown))
    for i in range(n1):
        for j in range(nz):
            for k in range(nk):
                row = (i * nz + j) * nk + k
                s, px, pz, ds = _ray_samples(grid.x1[i], grid.z[j], grid.alpha[k], grid, ds_target)
                if s.size == 0:
                    continue
                a_s = _bilinear_medium(px, pz, atten, grid)
                inc = 0.5 * ds * (a_s[1:] + a_s[:-1])
                acc = np.concatenate([[0.0], np.cumsum(inc)])
                c_s = np.exp(acc)
                trap = np.full(s.size, ds)
                trap[0] = trap[-1] = 0.5 * ds
                sample_w = trap * c_s / c_s[-1]
                fx = (px - grid.x1[0]) / grid.h_x1
                ix = np.clip(np.floor(fx).astype(np.int64), 0, n1 - 2)
                wx = np.clip(fx - ix, 0.0, 1.0)
                fz = (pz - grid.z[0]) / grid.h_z
                iz = np.clip(np.floor(fz).astype(np.int64), 0, nz - 2)
                wz = np.clip(fz - iz, 0.0, 1.0)
                corners = (
                    (ix, iz, (1.0 - wx) * (1.0 - wz)),
                    (ix + 1, iz, wx * (1.0 - wz)),
                    (ix, iz + 1, (1.0 - wx) * wz),
                    (ix + 1, iz + 1, wx * wz),
                )
                for ci, cj, cw in corners:
                    coeff = sample_w * cw * mu_s[ci, cj]
                    for m in range(s.size):
                        if coeff[m] == 0.0:
                            continue
                        base = (ci[m] * nz + cj[m]) * nk
                        smat[row, base : base + nk] += coeff[m] * w[k, :]

    mat = np.eye(n_unknown) - smat
    sol = np.linalg.solve(mat, rhs)
    residual = float(np.max(np.abs(mat @ sol - rhs)))

    u = u0_hull.copy()
    u[med] = sol.reshape((n1, nz, nk))
    _fill_outside_medium(u, phantom, kernel, grid, ds_target, None, w, mu_s, np.ascontiguousarray(atten), med)
    field = RadianceField(u, grid, "hull")
    if return_info:
        return field, {"residual": residual, "unknowns": n_unknown}
    return field
