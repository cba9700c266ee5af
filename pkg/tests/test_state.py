import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from walkoff.grids import Axis, ComplexGrid2D, CoordinateFrame, DomainMismatchError, fourier_pair
from walkoff.state import (
    AnsatzParams,
    MomentumStateParams,
    SampledMomentumState,
    ansatz_amplitude,
    build_ansatz_wavefunction,
    build_momentum_wavefunction,
    estimate_rho,
    momentum_amplitude,
    sinc,
)

REFERENCE = MomentumStateParams(w_p=50.0, beta=1.0, t=4.0, l=3.0)


def singular_fractions(values):
    s = np.linalg.svd(values, compute_uv=False)
    return s, s[0] ** 2 / np.sum(s**2)


def test_sinc_convention():
    assert sinc(0.0) == 1.0
    assert abs(sinc(math.pi)) < 1e-16
    assert sinc(1.0) == pytest.approx(math.sin(1.0))


def test_origin_values():
    assert momentum_amplitude(MomentumStateParams(50, 1, t=7.0, l=0.0), 0.0, 0.0) == pytest.approx(1.0)
    # e^{3i} sin(3) / 3 evaluated at 40 digits
    expected = complex(-0.046569249699820978802, 0.0066382855582723299091)
    assert momentum_amplitude(REFERENCE, 0.0, 0.0) == pytest.approx(expected, rel=1e-13)


def test_exchange_symmetry_and_bound():
    st_ = build_momentum_wavefunction(REFERENCE, Axis.symmetric(3.0, 48))
    np.testing.assert_array_equal(st_.grid.values, st_.grid.values.T)
    assert np.abs(st_.grid.values).max() <= 1.0


def test_rejects_asymmetric_axis():
    with pytest.raises(DomainMismatchError):
        build_momentum_wavefunction(REFERENCE, Axis(-1.0, 2.0, 8))
    with pytest.raises(DomainMismatchError):
        build_ansatz_wavefunction(AnsatzParams(1, 0, math.inf, 0, 1), Axis(0.0, 2.0, 8))


@pytest.mark.parametrize("kwargs", [{"w_p": 0}, {"beta": -1}, {"t": math.nan}, {"l": math.inf}])
def test_param_validation(kwargs):
    with pytest.raises(ValueError):
        MomentumStateParams(**{"w_p": 1.0, "beta": 1.0, **kwargs})


def test_t_zero_is_rank_one():
    st_ = build_momentum_wavefunction(MomentumStateParams(50, 1, t=0.0, l=3.0), Axis.symmetric(3.0, 64))
    _, frac = singular_fractions(st_.in_frame(CoordinateFrame.SUM_DIFFERENCE).values)
    assert frac > 1 - 1e-6


def test_reference_state_is_not_rank_one():
    st_ = build_momentum_wavefunction(REFERENCE, Axis.symmetric(3.0, 64))
    s, _ = singular_fractions(st_.in_frame(CoordinateFrame.SUM_DIFFERENCE).values)
    assert s[1] > 1e-3 * s[0]


def test_in_frame_is_exact_rotation():
    st_ = build_momentum_wavefunction(REFERENCE, Axis.symmetric(2.0, 16))
    rot = st_.in_frame(CoordinateFrame.SUM_DIFFERENCE)
    u = st_.grid.axis_a.points
    i, j = 5, 11
    p_s = (u[i] + u[j]) / math.sqrt(2)
    p_i = (u[i] - u[j]) / math.sqrt(2)
    assert rot.values[i, j] == pytest.approx(momentum_amplitude(REFERENCE, p_s, p_i))
    assert st_.in_frame(CoordinateFrame.SIGNAL_IDLER) is st_.grid


class TestAnsatz:
    def test_origin(self):
        assert ansatz_amplitude(AnsatzParams(2.0, 0.0, 5.0, 1.0, 3.0), 0.0, 0.0) == pytest.approx(1.0)

    def test_first_zero(self):
        p = AnsatzParams(w_phi=2.0, xi=-1.0, rho=5.0, x0=1.0, w_p=3.0)
        x_minus = math.sqrt((p.xi + math.pi) * p.w_phi**2)
        # x_+ = 0, x_- given: x_s = x_-/sqrt2, x_i = -x_-/sqrt2
        val = ansatz_amplitude(p, x_minus / math.sqrt(2), -x_minus / math.sqrt(2))
        assert abs(val) < 1e-15

    def test_magnitude_independent_of_phase_params(self):
        ax = Axis.symmetric(6.0, 32)
        a = build_ansatz_wavefunction(AnsatzParams(2.0, -2.0, 3.0, 7.0, 3.0), ax).grid.values
        b = build_ansatz_wavefunction(AnsatzParams(2.0, -2.0, 11.0, -4.0, 3.0), ax).grid.values
        c = build_ansatz_wavefunction(AnsatzParams(2.0, -2.0, math.inf, -4.0, 3.0), ax).grid.values
        np.testing.assert_allclose(np.abs(a), np.abs(b), rtol=1e-13)
        np.testing.assert_allclose(np.abs(a), np.abs(c), rtol=1e-13)
        assert np.all(c.imag == 0)

    def test_validation(self):
        with pytest.raises(ValueError):
            AnsatzParams(0.0, 0.0, 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            AnsatzParams(1.0, 0.0, -1.0, 0.0, 1.0)


class TestRho:
    def test_unit_case(self):
        assert estimate_rho(2.0, 1.0, 1.0, 1.0) == pytest.approx(1.0)

    def test_scaling(self):
        assert estimate_rho(2.0, 2.0, 1.0, 1.0) == pytest.approx(2 ** (4 / 3))

    def test_physical_fixture(self):
        # 40-digit evaluation of (k w^4 L / 2t)^(1/3)
        rho = estimate_rho(2 * math.pi / 810e-9, 50e-6, 1e-3, 50e-6)
        assert rho == pytest.approx(0.00078558217790009599308, rel=1e-12)

    def test_zero_walkoff_disables(self):
        assert math.isinf(estimate_rho(1.0, 1.0, 1.0, 0.0))
        with pytest.raises(ValueError):
            estimate_rho(1.0, 1.0, 1.0, -1.0)
        with pytest.raises(ValueError):
            estimate_rho(0.0, 1.0, 1.0, 1.0)


def test_sampled_state_matches_fourier_pair():
    ax = Axis.symmetric(6.0, 24)
    x = ax.points
    rng = np.random.default_rng(0)
    values = rng.normal(size=(24, 24)) * np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / 8)
    grid = ComplexGrid2D(ax, ax, values.astype(complex))
    st_ = SampledMomentumState(grid)
    spec = fourier_pair(grid)
    p = spec.axis_a.points
    np.testing.assert_allclose(st_.amplitude_on(p, p), spec.values, atol=1e-12)
    # pointwise evaluation agrees with the tensor form
    assert st_.amplitude(p[3], p[17]) == pytest.approx(spec.values[3, 17], abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(ps=st.floats(-5, 5), pi_=st.floats(-5, 5), t=st.floats(-6, 6), l=st.floats(-6, 6))
def test_amplitude_bounded_and_symmetric(ps, pi_, t, l):
    p = MomentumStateParams(w_p=3.0, beta=1.5, t=t, l=l)
    a = momentum_amplitude(p, ps, pi_)
    assert abs(a) <= 1.0 + 1e-15
    assert a == momentum_amplitude(p, pi_, ps)
