"""Boundary traces, noise, and the derived inversion data."""

import numpy as np
import pytest

from rtetomo import (
    UsageError,
    add_noise,
    derive_boundary_data,
    downsample_boundary,
    extract_boundary,
)
from rtetomo.boundary import FACE_ORDER
from rtetomo.stencils import diff_axis, onesided_first_end


def test_extract_boundary_shapes_and_values(field10, grid10):
    faces = extract_boundary(field10)
    n1, nz, nk = grid10.shape_medium
    assert faces["bottom"].shape == faces["top"].shape == (n1, nk)
    assert faces["left"].shape == faces["right"].shape == (nz - 2, nk)
    u = field10.medium_view()
    np.testing.assert_array_equal(faces["top"], u[:, -1, :])
    np.testing.assert_array_equal(faces["left"], u[0, 1:-1, :])


def test_add_noise_bounds_and_determinism(field10):
    faces = extract_boundary(field10)
    noisy = add_noise(faces, 0.05, seed=3)
    again = add_noise(faces, 0.05, seed=3)
    other = add_noise(faces, 0.05, seed=4)
    for name in FACE_ORDER:
        g = faces[name]
        assert np.all(noisy[name] >= g)
        assert np.all(noisy[name] < g * 1.05)
        np.testing.assert_array_equal(noisy[name], again[name])
        assert np.any(noisy[name] != other[name])


def test_add_noise_zero_level_copies(field10):
    faces = extract_boundary(field10)
    clean = add_noise(faces, 0.0, seed=9)
    for name in FACE_ORDER:
        np.testing.assert_array_equal(clean[name], faces[name])
        assert clean[name] is not faces[name]
    with pytest.raises(UsageError):
        add_noise(faces, -0.01, seed=0)


def test_derive_applies_the_requested_noise(field10, grid10, kernel):
    faces = extract_boundary(field10)
    clean = derive_boundary_data(faces, grid10, kernel)
    noisy = derive_boundary_data(faces, grid10, kernel, delta=0.05, seed=3)
    assert clean.delta == 0.0 and noisy.delta == 0.05
    assert np.any(noisy.g["top"] != clean.g["top"])
    assert np.any(noisy.g1["top"] != clean.g1["top"])
    np.testing.assert_array_equal(
        noisy.g["top"], add_noise(faces, 0.05, seed=3)["top"]
    )


def test_log_data_and_alpha_quotient(boundary10, field10, grid10):
    u = field10.medium_view()
    np.testing.assert_allclose(boundary10.g1["top"], np.log(u[:, -1, :]), atol=1e-14)
    # d_alpha ln g and (d_alpha g) / g agree up to the O(h^2) stencil error
    gap = boundary10.g2["top"] - diff_axis(boundary10.g1["top"], grid10.h_alpha, axis=1)
    assert np.max(np.abs(gap)) < 0.05


def test_normal_derivative_median_converges(field10, field20, grid10, grid20, kernel):
    def median_error(field, grid):
        bds = derive_boundary_data(extract_boundary(field), grid, kernel)
        lnu = np.log(field.medium_view())
        oracle = onesided_first_end(lnu, grid.h_z, axis=1)
        return float(np.median(np.abs(bds.g3 - oracle)))

    coarse = median_error(field10, grid10)
    fine = median_error(field20, grid20)
    # interior aperture-edge spikes keep the sup norm large; the bulk error
    # is second order, so halving h should quarter the median
    assert fine < 0.25 * coarse
    assert fine < 0.3


def test_attenuation_trace_shifts_g3_by_a_over_nu(field10, grid10, kernel):
    faces = extract_boundary(field10)
    with_trace = derive_boundary_data(faces, grid10, kernel)
    without = derive_boundary_data(faces, grid10, kernel, attenuation_trace=0.0)
    zb = grid10.geometry.slab_top
    r = np.hypot(grid10.x1[:, None] - grid10.alpha[None, :], zb)
    np.testing.assert_allclose(without.g3 - with_trace.g3, 5.0 * r / zb, atol=1e-10)
    assert with_trace.attenuation_trace == 5.0


def test_printed_sign_variant_differs(field10, grid10, kernel):
    faces = extract_boundary(field10)
    a = derive_boundary_data(faces, grid10, kernel)
    b = derive_boundary_data(faces, grid10, kernel, neumann_sign="printed")
    assert np.max(np.abs(a.g3 - b.g3)) > 1.0
    with pytest.raises(UsageError):
        derive_boundary_data(faces, grid10, kernel, neumann_sign="upside-down")


def test_derive_rejects_nonpositive_traces(field10, grid10, kernel):
    faces = extract_boundary(field10)
    faces["left"] = faces["left"].copy()
    faces["left"][0, 0] = 0.0
    with pytest.raises(UsageError):
        derive_boundary_data(faces, grid10, kernel)


def test_full_side_includes_corners(boundary10, grid10):
    col = boundary10.full_side("g1", "left")
    assert col.shape == (grid10.z.size, grid10.alpha.size)
    np.testing.assert_array_equal(col[0], boundary10.g1["bottom"][0])
    np.testing.assert_array_equal(col[1:-1], boundary10.g1["left"])
    np.testing.assert_array_equal(col[-1], boundary10.g1["top"][0])
    col = boundary10.full_side("g2", "right")
    np.testing.assert_array_equal(col[0], boundary10.g2["bottom"][-1])
    np.testing.assert_array_equal(col[-1], boundary10.g2["top"][-1])


def test_downsample_restricts_without_recomputing(boundary20, grid10):
    coarse = downsample_boundary(boundary20, 2)
    assert coarse.grid.h_x1 == grid10.h_x1
    np.testing.assert_array_equal(coarse.g["top"], boundary20.g["top"][::2, ::2])
    np.testing.assert_array_equal(coarse.g1["left"], boundary20.g1["left"][1::2, ::2])
    np.testing.assert_array_equal(coarse.g3, boundary20.g3[::2, ::2])
    np.testing.assert_array_equal(coarse.g4, boundary20.g4[::2, ::2])
    assert coarse.delta == boundary20.delta
    assert coarse.neumann_sign == boundary20.neumann_sign


def test_downsample_factor_validation(boundary20):
    same = downsample_boundary(boundary20, 1)
    np.testing.assert_array_equal(same.g3, boundary20.g3)
    with pytest.raises(UsageError):
        downsample_boundary(boundary20, 3)
    with pytest.raises(UsageError):
        downsample_boundary(boundary20, 0)
