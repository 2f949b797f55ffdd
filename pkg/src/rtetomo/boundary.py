"""Boundary measurements and the derived data driving the inversion.

From the radiance traces g on the medium boundary the inversion needs, per
source abscissa alpha:

  g1 = ln g                         (Dirichlet data for the log field)
  g2 = (d_alpha g) / g              (Dirichlet data for its alpha-derivative)
  g3 = outward normal derivative of ln u on the top face, reconstructed
       from tangential derivatives and the scattering integral alone
  g4 = d_alpha g3

All differentiation is second order (central inside, one-sided at the
ends) and happens on the acquisition grid; production runs acquire on a
finer grid than they invert on and downsample afterwards, which tames the
noise amplification of differencing.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import UsageError
from .forward import scatter_matrix
from .geometry import GridSet
from .seeding import stream
from .stencils import diff_axis

FACE_ORDER = ("bottom", "top", "left", "right")


def extract_boundary(field):
    """Radiance traces on the four medium faces.

    Bottom/top faces keep the corner nodes, shape (n_x1, n_alpha); the
    side faces carry interior z rows only, shape (n_z - 2, n_alpha).
    """
    u = field.medium_view()
    return {
        "bottom": u[:, 0, :].copy(),
        "top": u[:, -1, :].copy(),
        "left": u[0, 1:-1, :].copy(),
        "right": u[-1, 1:-1, :].copy(),
    }


def add_noise(faces, delta, seed):
    """Multiplicative noise g -> g (1 + delta zeta), zeta uniform in [0, 1).

    Draws come from the dedicated 'boundary-noise' stream in the fixed
    face order, so the noisy data depend only on (seed, delta), not on
    call history.  delta = 0 returns copies unchanged.
    """
    if delta < 0:
        raise UsageError("noise level must be non-negative")
    rng = stream(seed, "boundary-noise")
    out = {}
    for name in FACE_ORDER:
        g = faces[name]
        zeta = rng.random(g.shape)
        out[name] = g * (1.0 + delta * zeta)
    return out


@dataclass(eq=False)
class BoundaryDataSet:
    """All boundary quantities on one acquisition grid.

    ``g``, ``g1``, ``g2`` are per-face dicts (see
    :func:`extract_boundary` for shapes); ``g3``/``g4`` live on the top
    face only.  ``delta``/``seed`` record the noise that produced ``g``,
    ``neumann_sign`` which variant of the normal-derivative formula was
    used ('rederived' or 'printed').
    """

    grid: GridSet
    g: dict
    g1: dict
    g2: dict
    g3: np.ndarray
    g4: np.ndarray
    delta: float
    seed: int
    neumann_sign: str = "rederived"
    attenuation_trace: float = 5.0

    def __post_init__(self):
        n1 = self.grid.x1.size
        nz = self.grid.z.size
        nk = self.grid.alpha.size
        shapes = {"bottom": (n1, nk), "top": (n1, nk), "left": (nz - 2, nk), "right": (nz - 2, nk)}
        for dct in (self.g, self.g1, self.g2):
            for name in FACE_ORDER:
                if dct[name].shape != shapes[name]:
                    raise UsageError(f"face {name!r} has shape {dct[name].shape}, want {shapes[name]}")
        if self.g3.shape != (n1, nk) or self.g4.shape != (n1, nk):
            raise UsageError("top-face normal data shape mismatch")

    def full_side(self, quantity, side):
        """Side-face column of ``quantity`` ('g1' or 'g2') including the
        corner values shared with the bottom/top faces; shape (n_z, n_alpha)."""
        dct = getattr(self, quantity)
        edge = 0 if side == "left" else -1
        nz = self.grid.z.size
        col = np.empty((nz, self.grid.alpha.size))
        col[0] = dct["bottom"][edge]
        col[1:-1] = dct[side]
        col[-1] = dct["top"][edge]
        return col


def derive_boundary_data(faces, grid, kernel, mu_s_value=5.0, neumann_sign="rederived",
                         delta=0.0, seed=0, attenuation_trace=None):
    """Log data and derived derivatives from (possibly noisy) traces.

    The normal derivative on the top face never touches the (unknown)
    interior field: writing the transport equation on the face leaves
    tangential, attenuation-trace, and scattering contributions only,

        g3 = (1/nu_n) [ -nu_1 d_x1(ln g) - a_top + mu_s (int G g dbeta) / g ].

    ``attenuation_trace`` is the known attenuation at the top face;
    absorbers are assumed interior, so it defaults to the scattering
    background ``mu_s_value``.  Passing 0 drops the term, which biases
    the reconstruction near the top by about a_top / nu_n.
    ``neumann_sign='printed'`` flips to the variant with the minus over
    the whole tangential-plus-scattering bracket.
    """
    if neumann_sign not in ("rederived", "printed"):
        raise UsageError(f"unknown neumann_sign {neumann_sign!r}")
    if attenuation_trace is None:
        attenuation_trace = mu_s_value
    if delta > 0.0:
        faces = add_noise(faces, delta, seed)
    g1 = {}
    g2 = {}
    for name in FACE_ORDER:
        g = faces[name]
        if np.any(g <= 0.0) or not np.all(np.isfinite(g)):
            raise UsageError(f"non-positive or non-finite radiance on face {name!r}")
        g1[name] = np.log(g)
        g2[name] = diff_axis(g, grid.h_alpha, axis=1) / g

    top = faces["top"]
    zb = grid.geometry.slab_top
    dx = grid.x1[:, None] - grid.alpha[None, :]
    r = np.hypot(dx, zb)
    nu1 = dx / r
    nu_n = zb / r
    w_x1 = diff_axis(g1["top"], grid.h_x1, axis=0)
    smat = scatter_matrix(kernel, grid.alpha, grid.h_alpha)
    scattering = mu_s_value * (top @ smat.T) / top
    if neumann_sign == "rederived":
        g3 = (-nu1 * w_x1 + scattering - attenuation_trace) / nu_n
    else:
        g3 = (-(nu1 * w_x1 + scattering) - attenuation_trace) / nu_n
    g4 = diff_axis(g3, grid.h_alpha, axis=1)
    return BoundaryDataSet(
        grid=grid, g={k: faces[k].copy() for k in FACE_ORDER}, g1=g1, g2=g2,
        g3=g3, g4=g4, delta=float(delta), seed=int(seed), neumann_sign=neumann_sign,
        attenuation_trace=float(attenuation_trace),
    )


def downsample_boundary(bds, factor):
    """Restrict a dataset to every ``factor``-th node on all axes.

    The coarse grid keeps both endpoints of every span, so the fine node
    counts minus one must be divisible by ``factor``.  Derived quantities
    are restricted, not recomputed: differentiation stays on the fine
    grid, which is the point of acquiring finely.
    """
    factor = int(factor)
    if factor < 1:
        raise UsageError("downsampling factor must be >= 1")
    if factor == 1:
        return replace(bds)
    g = bds.grid
    for n in (g.x1.size, g.z.size, g.alpha.size):
        if (n - 1) % factor:
            raise UsageError(f"{n} nodes cannot be downsampled by {factor}")
    coarse = GridSet.uniform(g.geometry, g.h_x1 * factor)

    def pick(dct):
        return {
            "bottom": dct["bottom"][::factor, ::factor].copy(),
            "top": dct["top"][::factor, ::factor].copy(),
            "left": dct["left"][factor - 1 :: factor, ::factor].copy(),
            "right": dct["right"][factor - 1 :: factor, ::factor].copy(),
        }

    return BoundaryDataSet(
        grid=coarse,
        g=pick(bds.g),
        g1=pick(bds.g1),
        g2=pick(bds.g2),
        g3=bds.g3[::factor, ::factor].copy(),
        g4=bds.g4[::factor, ::factor].copy(),
        delta=bds.delta,
        seed=bds.seed,
        neumann_sign=bds.neumann_sign,
        attenuation_trace=bds.attenuation_trace,
    )
