"""Ray-marching backends for the source-to-node line integrals.

For each target node x and source abscissa alpha the kernels march the
segment of the ray [x_alpha, x] that lies above the medium's lower edge
(media vanish below it, so the skipped part contributes nothing, and
starting at the crossing keeps the interface sharp instead of smearing it
across one interpolation cell).  Marching accumulates

  - the attenuation integral A(s), giving c = exp(A(ell)), and
  - the attenuated scattering source T = int c(s) V(s) ds,

with trapezoid rule in arclength and bilinear interpolation of the nodal
attenuation and scattering-density fields.  The returned pair per (node,
source) is (T / c, c).

Two implementations share the exact same quadrature: a numba kernel
parallelized over target nodes (no reductions, so results are identical
for any thread count) and a vectorized numpy fallback batched per source.
``RTETOMO_BACKEND`` in the environment forces ``numba`` or ``numpy``; by
default numba is used when importable.
"""

import math
import os

import numpy as np

from .errors import UsageError

try:
    import numba
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only when numba is absent
    HAS_NUMBA = False
    prange = range

_ENV_FLAG = "RTETOMO_BACKEND"


def active_backend():
    """Backend selected by the environment: 'numba' or 'numpy'."""
    choice = os.environ.get(_ENV_FLAG, "auto").strip().lower() or "auto"
    if choice not in ("auto", "numba", "numpy"):
        raise UsageError(f"{_ENV_FLAG} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba" and not HAS_NUMBA:
        raise UsageError("numba backend requested but numba is not importable")
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    return choice


def set_workers(n):
    """Set the numba thread count, clamped to the compiled-in maximum.

    Returns the effective count (always 1 for the numpy backend).  A value
    of 0 or None keeps the current setting.
    """
    if not HAS_NUMBA:
        return 1
    if n:
        limit = numba.config.NUMBA_NUM_THREADS
        numba.set_num_threads(max(1, min(int(n), limit)))
    return numba.get_num_threads()


def sweep(tx, tz, alpha, atten, vsrc, x0, h1, z0, hz, floor_z, ds_target, backend=None):
    """March all (target, source) rays; see the module docstring.

    Parameters
    ----------
    tx, tz : (nt,) target coordinates; targets at or below ``floor_z`` are
        returned untouched as (0, 1).
    alpha : (nk,) source abscissae on the z=0 segment.
    atten, vsrc : nodal attenuation (n1, nz) and scattering density
        (n1, nz, nk) on the medium grid with origin (x0, z0) and steps
        (h1, hz); points outside the medium x-range read as zero.
    floor_z : lower edge of the medium (equals z0 on the standard grids).
    ds_target : requested arclength step; each ray uses the closest step
        that divides its marched segment evenly.

    Returns
    -------
    (scatter, c) : two (nt, nk) arrays.
    """
    tx = np.ascontiguousarray(tx, dtype=float)
    tz = np.ascontiguousarray(tz, dtype=float)
    alpha = np.ascontiguousarray(alpha, dtype=float)
    atten = np.ascontiguousarray(atten, dtype=float)
    vsrc = np.ascontiguousarray(vsrc, dtype=float)
    if atten.shape != vsrc.shape[:2] or vsrc.shape[2] != alpha.size:
        raise UsageError("attenuation / scattering-density shapes disagree")
    scat = np.empty((tx.size, alpha.size))
    c = np.empty_like(scat)
    if (backend or active_backend()) == "numba":
        _sweep_numba(tx, tz, alpha, atten, vsrc, x0, h1, z0, hz, floor_z, ds_target, scat, c)
    else:
        _sweep_numpy(tx, tz, alpha, atten, vsrc, x0, h1, z0, hz, floor_z, ds_target, scat, c)
    return scat, c


def _sweep_numpy(tx, tz, alpha, atten, vsrc, x0, h1, z0, hz, floor_z, ds_target, out_scat, out_c):
    n1, nz = atten.shape
    active = tz > floor_z + 1e-12
    out_scat[~active] = 0.0
    out_c[~active] = 1.0
    if not np.any(active):
        return
    ax = tx[active]
    az = tz[active]
    for k in range(alpha.size):
        dxr = ax - alpha[k]
        ell = np.hypot(dxr, az)
        s_a = ell * (floor_z / az)
        seg = ell - s_a
        m_cnt = np.maximum(np.ceil(seg / ds_target).astype(np.int64) + 1, 2)
        ds = seg / (m_cnt - 1)
        m_max = int(m_cnt.max())
        m = np.arange(m_max)
        live = m[None, :] < m_cnt[:, None]
        mm = np.minimum(m[None, :], m_cnt[:, None] - 1)
        s = s_a[:, None] + ds[:, None] * mm
        tpar = s / ell[:, None]
        px = alpha[k] + tpar * dxr[:, None]
        pz = tpar * az[:, None]

        fx = (px - x0) / h1
        inside = (fx >= -1e-9) & (fx <= (n1 - 1) + 1e-9)
        ix = np.clip(np.floor(fx).astype(np.int64), 0, n1 - 2)
        wx = np.clip(fx - ix, 0.0, 1.0)
        fz = (pz - z0) / hz
        iz = np.clip(np.floor(fz).astype(np.int64), 0, nz - 2)
        wz = np.clip(fz - iz, 0.0, 1.0)
        w00 = (1.0 - wx) * (1.0 - wz)
        w10 = wx * (1.0 - wz)
        w01 = (1.0 - wx) * wz
        w11 = wx * wz
        a_s = (
            w00 * atten[ix, iz]
            + w10 * atten[ix + 1, iz]
            + w01 * atten[ix, iz + 1]
            + w11 * atten[ix + 1, iz + 1]
        )
        vk = vsrc[:, :, k]
        v_s = (
            w00 * vk[ix, iz]
            + w10 * vk[ix + 1, iz]
            + w01 * vk[ix, iz + 1]
            + w11 * vk[ix + 1, iz + 1]
        )
        a_s = np.where(inside, a_s, 0.0)
        v_s = np.where(inside, v_s, 0.0)

        gate = live[:, 1:]
        inc = 0.5 * ds[:, None] * (a_s[:, 1:] + a_s[:, :-1]) * gate
        acc = np.concatenate([np.zeros((inc.shape[0], 1)), np.cumsum(inc, axis=1)], axis=1)
        c_s = np.exp(acc)
        cv = c_s * v_s
        t_total = (0.5 * ds[:, None] * (cv[:, 1:] + cv[:, :-1]) * gate).sum(axis=1)
        c_end = c_s[:, -1]
        out_scat[active, k] = t_total / c_end
        out_c[active, k] = c_end


def _march_one(tx, tz, alpha, atten, vsrc, x0, h1, z0, hz, floor_z, ds_target, out_scat, out_c, t, k):
    n1 = atten.shape[0]
    nz = atten.shape[1]
    al = alpha[k]
    dxr = tx[t] - al
    zt = tz[t]
    ell = math.hypot(dxr, zt)
    s_a = ell * (floor_z / zt)
    seg = ell - s_a
    m_cnt = int(math.ceil(seg / ds_target)) + 1
    if m_cnt < 2:
        m_cnt = 2
    ds = seg / (m_cnt - 1)
    acc = 0.0
    t_total = 0.0
    prev_a = 0.0
    prev_cv = 0.0
    c_m = 1.0
    for m in range(m_cnt):
        s = s_a + ds * m
        tpar = s / ell
        px = al + tpar * dxr
        pz = tpar * zt
        fx = (px - x0) / h1
        a_s = 0.0
        v_s = 0.0
        if fx >= -1e-9 and fx <= (n1 - 1) + 1e-9:
            ix = int(math.floor(fx))
            if ix < 0:
                ix = 0
            if ix > n1 - 2:
                ix = n1 - 2
            wx = fx - ix
            if wx < 0.0:
                wx = 0.0
            if wx > 1.0:
                wx = 1.0
            fz = (pz - z0) / hz
            iz = int(math.floor(fz))
            if iz < 0:
                iz = 0
            if iz > nz - 2:
                iz = nz - 2
            wz = fz - iz
            if wz < 0.0:
                wz = 0.0
            if wz > 1.0:
                wz = 1.0
            w00 = (1.0 - wx) * (1.0 - wz)
            w10 = wx * (1.0 - wz)
            w01 = (1.0 - wx) * wz
            w11 = wx * wz
            a_s = (
                w00 * atten[ix, iz]
                + w10 * atten[ix + 1, iz]
                + w01 * atten[ix, iz + 1]
                + w11 * atten[ix + 1, iz + 1]
            )
            v_s = (
                w00 * vsrc[ix, iz, k]
                + w10 * vsrc[ix + 1, iz, k]
                + w01 * vsrc[ix, iz + 1, k]
                + w11 * vsrc[ix + 1, iz + 1, k]
            )
        if m > 0:
            acc += 0.5 * ds * (prev_a + a_s)
            c_m = math.exp(acc)
            cv = c_m * v_s
            t_total += 0.5 * ds * (prev_cv + cv)
            prev_cv = cv
        else:
            prev_cv = v_s
        prev_a = a_s
    out_c[t, k] = c_m
    out_scat[t, k] = t_total / c_m


def _py_sweep(tx, tz, alpha, atten, vsrc, x0, h1, z0, hz, floor_z, ds_target, out_scat, out_c):
    nt = tx.shape[0]
    nk = alpha.shape[0]
    for t in prange(nt):
        if tz[t] <= floor_z + 1e-12:
            for k in range(nk):
                out_scat[t, k] = 0.0
                out_c[t, k] = 1.0
            continue
        for k in range(nk):
            _march_one(tx, tz, alpha, atten, vsrc, x0, h1, z0, hz, floor_z, ds_target, out_scat, out_c, t, k)


if HAS_NUMBA:
    _march_one = njit(cache=True)(_march_one)
    _sweep_numba = njit(cache=True, parallel=True)(_py_sweep)
else:  # pragma: no cover
    def _sweep_numba(*args):
        raise UsageError("numba backend unavailable")
