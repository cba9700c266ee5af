import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walkoff.grids import (
    Axis,
    ComplexGrid2D,
    CoordinateFrame,
    DomainMismatchError,
    JointIntensity,
    fourier_pair,
    rotate_frame,
    to_sum_difference,
)


def gaussian_grid(axis, w=1.0, shift=(0.0, 0.0)):
    x = axis.points
    return np.exp(-((x[:, None] - shift[0]) ** 2 + (x[None, :] - shift[1]) ** 2) / (2 * w**2)).astype(complex)


class TestAxis:
    def test_midpoint_sampling(self):
        ax = Axis(0.0, 1.0, 4)
        np.testing.assert_allclose(ax.points, [0.125, 0.375, 0.625, 0.875])
        assert ax.spacing == 0.25

    @pytest.mark.parametrize("args", [(1.0, 0.0, 4), (0.0, 1.0, 1), (0.0, math.inf, 4), (0.0, 1.0, 2.5)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            Axis(*args)

    def test_centered_contains_zero(self):
        for n in (7, 8, 124):
            ax = Axis.centered(0.3, n)
            assert np.min(np.abs(ax.points)) < 1e-12

    def test_symmetric(self):
        ax = Axis.symmetric(3.0, 10)
        assert ax.is_symmetric
        np.testing.assert_allclose(ax.points, -ax.points[::-1])

    def test_conjugate_spacing(self):
        ax = Axis.symmetric(8.0, 64)
        assert math.isclose(ax.conjugate().spacing, 2 * math.pi / (ax.n * ax.spacing))


class TestFourierPair:
    def test_gaussian_closed_form(self):
        # unitary FT of exp(-x^2/2) in each dimension is exp(-p^2/2)
        ax = Axis.symmetric(12.0, 96)
        spec = fourier_pair(ComplexGrid2D(ax, ax, gaussian_grid(ax)))
        p = spec.axis_a.points
        expected = np.exp(-(p[:, None] ** 2 + p[None, :] ** 2) / 2)
        assert np.max(np.abs(spec.values - expected)) < 1e-10

    def test_shift_becomes_phase(self):
        ax = Axis.symmetric(14.0, 112)
        spec = fourier_pair(ComplexGrid2D(ax, ax, gaussian_grid(ax, shift=(1.5, -0.5))))
        p = spec.axis_a.points
        expected = np.exp(-(p[:, None] ** 2 + p[None, :] ** 2) / 2) * np.exp(
            -1j * (1.5 * p[:, None] - 0.5 * p[None, :])
        )
        assert np.max(np.abs(spec.values - expected)) < 1e-9

    def test_parseval_and_round_trip(self):
        rng = np.random.default_rng(3)
        ax = Axis(-2.0, 5.0, 24)
        values = rng.normal(size=(24, 24)) + 1j * rng.normal(size=(24, 24))
        grid = ComplexGrid2D(ax, ax, values)
        spec = fourier_pair(grid)
        assert math.isclose(spec.norm2(), grid.norm2(), rel_tol=1e-12)
        back = fourier_pair(spec, "inverse", axes=(ax, ax))
        np.testing.assert_allclose(back.values, values, atol=1e-12)

    def test_constant_maps_to_zero_frequency(self):
        ax = Axis.symmetric(4.0, 16)
        spec = fourier_pair(ComplexGrid2D(ax, ax, np.ones((16, 16), complex)))
        peak = np.unravel_index(np.argmax(np.abs(spec.values)), spec.values.shape)
        assert spec.axis_a.points[peak[0]] == pytest.approx(0.0, abs=1e-12)
        assert np.sum(np.abs(spec.values) > 1e-9) == 1

    def test_bad_direction(self):
        ax = Axis.symmetric(1.0, 4)
        with pytest.raises(ValueError):
            fourier_pair(ComplexGrid2D(ax, ax, np.ones((4, 4), complex)), "sideways")


class TestRotation:
    def test_sum_difference_coordinates(self):
        xp, xm = to_sum_difference(3.0, 1.0)
        assert xp == pytest.approx(4 / math.sqrt(2))
        assert xm == pytest.approx(2 / math.sqrt(2))

    def test_involution_on_smooth_field(self):
        ax = Axis.symmetric(10.0, 80)
        grid = ComplexGrid2D(ax, ax, gaussian_grid(ax, w=1.5, shift=(0.7, -0.4)))
        there = rotate_frame(grid, CoordinateFrame.SIGNAL_IDLER, CoordinateFrame.SUM_DIFFERENCE)
        back = rotate_frame(there, CoordinateFrame.SUM_DIFFERENCE, CoordinateFrame.SIGNAL_IDLER)
        assert np.linalg.norm(back.values - grid.values) / np.linalg.norm(grid.values) < 1e-2

    def test_rotation_of_product_gaussian(self):
        # exp(-x_s^2 / 2) exp(-x_i^2 / 8) in (x_+, x_-): a rotated, still Gaussian field
        ax = Axis.symmetric(12.0, 96)
        x = ax.points
        grid = ComplexGrid2D(ax, ax, np.exp(-x[:, None] ** 2 / 2 - x[None, :] ** 2 / 8).astype(complex))
        rot = rotate_frame(grid, CoordinateFrame.SIGNAL_IDLER, CoordinateFrame.SUM_DIFFERENCE)
        up, um = x[:, None], x[None, :]
        xs, xi = (up + um) / math.sqrt(2), (up - um) / math.sqrt(2)
        expected = np.exp(-xs**2 / 2 - xi**2 / 8)
        # bilinear error bound (h^2 / 8) (max|f_xx| + max|f_yy|), both curvatures <= 1
        bound = ax.spacing**2 / 8 * 2
        assert np.max(np.abs(rot.values - expected)) < bound

    def test_diagonal_peak_lands_on_sum_axis(self):
        ax = Axis.symmetric(8.0, 32)
        x = ax.points
        a = x[20]
        values = np.exp(-((x[:, None] - a) ** 2 + (x[None, :] - a) ** 2) / 0.02).astype(complex)
        rot = rotate_frame(ComplexGrid2D(ax, ax, values), CoordinateFrame.SIGNAL_IDLER, CoordinateFrame.SUM_DIFFERENCE)
        i, j = np.unravel_index(np.argmax(np.abs(rot.values)), rot.values.shape)
        assert abs(x[i] - a * math.sqrt(2)) <= ax.spacing
        assert abs(x[j]) <= ax.spacing

    def test_constant_stays_constant_inside(self):
        ax = Axis.symmetric(4.0, 32)
        rot = rotate_frame(ComplexGrid2D(ax, ax, np.full((32, 32), 2.0 + 0j)),
                           CoordinateFrame.SIGNAL_IDLER, CoordinateFrame.SUM_DIFFERENCE)
        x = ax.points
        inside = (np.abs(x[:, None]) + np.abs(x[None, :])) < 4.0 * math.sqrt(2) - 2 * ax.spacing
        np.testing.assert_allclose(rot.values[inside], 2.0, rtol=1e-12)

    def test_identity_and_nonsquare(self):
        a = Axis.symmetric(1.0, 4)
        b = Axis.symmetric(2.0, 4)
        g = ComplexGrid2D(a, a, np.ones((4, 4), complex))
        assert rotate_frame(g, CoordinateFrame.SIGNAL_IDLER, CoordinateFrame.SIGNAL_IDLER) is g
        with pytest.raises(DomainMismatchError):
            rotate_frame(ComplexGrid2D(a, b, np.ones((4, 4), complex)),
                         CoordinateFrame.SIGNAL_IDLER, CoordinateFrame.SUM_DIFFERENCE)


class TestJointIntensity:
    def test_validation(self):
        ax = Axis.symmetric(1.0, 2)
        with pytest.raises(ValueError):
            JointIntensity(ax, ax, np.array([[1.0, -1.0], [0.0, 0.0]]))
        with pytest.raises(ValueError):
            JointIntensity(ax, ax, np.zeros((2, 2)))
        with pytest.raises(ValueError):
            JointIntensity(ax, ax, np.array([[1.0, np.nan], [0.0, 0.0]]))
        with pytest.raises(ValueError):
            JointIntensity(ax, ax, np.ones((3, 2)))

    def test_read_only_and_normalized(self):
        ax = Axis.symmetric(1.0, 2)
        g = JointIntensity(ax, ax, np.array([[1.0, 3.0], [0.0, 4.0]]))
        with pytest.raises(ValueError):
            g.counts[0, 0] = 5.0
        assert g.normalized().total() == pytest.approx(1.0)

    def test_correlation_coefficient_of_diagonal(self):
        ax = Axis.symmetric(5.0, 20)
        assert JointIntensity(ax, ax, np.eye(20)).correlation_coefficient() == pytest.approx(1.0)
        assert JointIntensity(ax, ax, np.eye(20)[::-1]).correlation_coefficient() == pytest.approx(-1.0)


@settings(max_examples=30, deadline=None)
@given(
    lo=st.floats(-50, 50),
    width=st.floats(0.5, 80),
    n=st.integers(4, 40),
    seed=st.integers(0, 2**32 - 1),
)
def test_fourier_round_trip_property(lo, width, n, seed):
    rng = np.random.default_rng(seed)
    ax = Axis(lo, lo + width, n)
    values = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    grid = ComplexGrid2D(ax, ax, values)
    spec = fourier_pair(grid)
    assert math.isclose(spec.norm2(), grid.norm2(), rel_tol=1e-10)
    np.testing.assert_allclose(fourier_pair(spec, "inverse", axes=(ax, ax)).values, values, atol=1e-9)
