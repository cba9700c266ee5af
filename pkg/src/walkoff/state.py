"""Initial two-photon amplitudes in one transverse dimension.

Two constructions are provided:

* the momentum-space wavefunction of a Gaussian-pumped slab with
  transverse (``t``) and longitudinal (``l``) walk-off,
  ``exp(-w_p^2 p_+^2 / 4) exp(-i g) sinc(g)`` with
  ``g = beta p_-^2 + t p_+ - l``;
* a position-space ansatz with an ``x_+``-dependent phase curvature,
  ``exp(i x_-^2 (x_+ - x0) / rho^3) sinc(x_-^2 / w_phi^2 - xi) exp(-x_+^2 / w_p^2)``.

``sinc`` is the unnormalized ``sin(x) / x``.  States are left unnormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import (
    Axis,
    ComplexGrid2D,
    CoordinateFrame,
    DomainMismatchError,
    fourier_pair,
    to_sum_difference,
)

__all__ = [
    "AnsatzParams",
    "AnsatzPositionState",
    "BiphotonMomentumState",
    "MomentumStateParams",
    "SampledMomentumState",
    "ansatz_amplitude",
    "build_ansatz_wavefunction",
    "build_momentum_wavefunction",
    "estimate_rho",
    "momentum_amplitude",
    "sinc",
]


def sinc(x):
    """Unnormalized sinc, ``sin(x) / x`` with ``sinc(0) = 1``."""
    return np.sinc(np.asarray(x) / np.pi)


@dataclass(frozen=True)
class MomentumStateParams:
    w_p: float
    beta: float
    t: float = 0.0
    l: float = 0.0

    def __post_init__(self):
        if not (self.w_p > 0 and math.isfinite(self.w_p)):
            raise ValueError(f"w_p must be positive, got {self.w_p!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if not (math.isfinite(self.t) and math.isfinite(self.l)):
            raise ValueError("t and l must be finite")


def momentum_amplitude(params: MomentumStateParams, p_s, p_i):
    p_plus, p_minus = to_sum_difference(p_s, p_i)
    g = params.beta * p_minus**2 + params.t * p_plus - params.l
    return np.exp(-(params.w_p**2) * p_plus**2 / 4.0) * np.exp(-1j * g) * sinc(g)


def _require_symmetric(axis: Axis):
    if not axis.is_symmetric:
        raise DomainMismatchError(f"axis must be symmetric about 0, got [{axis.min}, {axis.max})")


@dataclass(frozen=True)
class BiphotonMomentumState:
    """Momentum amplitude sampled on ``(p_s, p_i)``; evaluable off-grid as well."""

    grid: ComplexGrid2D
    params: MomentumStateParams

    def amplitude(self, p_s, p_i):
        return momentum_amplitude(self.params, p_s, p_i)

    def amplitude_on(self, p_s_values, p_i_values):
        """Amplitude on the tensor grid ``p_s_values x p_i_values``."""
        return self.amplitude(np.asarray(p_s_values)[:, None], np.asarray(p_i_values)[None, :])

    def in_frame(self, frame: CoordinateFrame) -> ComplexGrid2D:
        """Exact samples in the requested frame, on the state's own axis.

        In the sum/difference frame the first index is ``p_+`` and the
        second ``p_-``; no interpolation is involved.
        """
        if frame == CoordinateFrame.SIGNAL_IDLER:
            return self.grid
        axis = self.grid.axis_a
        u_plus, u_minus = np.meshgrid(axis.points, axis.points, indexing="ij")
        p_s = (u_plus + u_minus) / math.sqrt(2.0)
        p_i = (u_plus - u_minus) / math.sqrt(2.0)
        return ComplexGrid2D(axis, axis, self.amplitude(p_s, p_i))


def build_momentum_wavefunction(params: MomentumStateParams, axis: Axis) -> BiphotonMomentumState:
    _require_symmetric(axis)
    p = axis.points
    values = momentum_amplitude(params, p[:, None], p[None, :])
    return BiphotonMomentumState(ComplexGrid2D(axis, axis, values), params)


@dataclass(frozen=True)
class AnsatzParams:
    """Position-space ansatz parameters; ``rho=math.inf`` disables the curvature phase."""

    w_phi: float
    xi: float
    rho: float
    x0: float
    w_p: float

    def __post_init__(self):
        if not (self.w_phi > 0 and math.isfinite(self.w_phi)):
            raise ValueError(f"w_phi must be positive, got {self.w_phi!r}")
        if not (self.w_p > 0 and math.isfinite(self.w_p)):
            raise ValueError(f"w_p must be positive, got {self.w_p!r}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive (or inf to disable curvature), got {self.rho!r}")
        if not (math.isfinite(self.xi) and math.isfinite(self.x0)):
            raise ValueError("xi and x0 must be finite")

    @property
    def curvature_enabled(self) -> bool:
        return math.isfinite(self.rho)


def ansatz_amplitude(params: AnsatzParams, x_s, x_i):
    x_plus, x_minus = to_sum_difference(x_s, x_i)
    magnitude = sinc(x_minus**2 / params.w_phi**2 - params.xi) * np.exp(-(x_plus**2) / params.w_p**2)
    if not params.curvature_enabled:
        return magnitude.astype(complex)
    phase = x_minus**2 * (x_plus - params.x0) / params.rho**3
    return np.exp(1j * phase) * magnitude


@dataclass(frozen=True)
class AnsatzPositionState:
    grid: ComplexGrid2D
    params: AnsatzParams


def build_ansatz_wavefunction(params: AnsatzParams, axis: Axis) -> AnsatzPositionState:
    _require_symmetric(axis)
    x = axis.points
    values = ansatz_amplitude(params, x[:, None], x[None, :])
    return AnsatzPositionState(ComplexGrid2D(axis, axis, values), params)


def estimate_rho(k: float, w_phi: float, L: float, t: float) -> float:
    """Curvature scale ``(k w_phi^4 L / (2 t))^(1/3)``; ``inf`` when ``t == 0``."""
    for name, value in (("k", k), ("w_phi", w_phi), ("L", L)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value!r}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t!r}")
    if t == 0:
        return math.inf
    return (k * w_phi**4 * L / (2.0 * t)) ** (1.0 / 3.0)


class SampledMomentumState:
    """Momentum representation of a sampled position-space field.

    Off-grid amplitudes are the exact Fourier transform of the sample set,
    ``dx_s dx_i / (2 pi) * sum psi(x) exp(-i p.x)``, so on the conjugate grid
    they coincide with :func:`fourier_pair`.
    """

    def __init__(self, position: ComplexGrid2D):
        self.position = position
        self._scale = position.axis_a.spacing * position.axis_b.spacing / (2.0 * math.pi)

    @classmethod
    def from_state(cls, state) -> "SampledMomentumState":
        return cls(state.grid if hasattr(state, "grid") else state)

    @property
    def grid(self) -> ComplexGrid2D:
        return fourier_pair(self.position, "forward")

    def _kernel(self, p, x):
        return np.exp(-1j * np.asarray(p)[:, None] * x[None, :])

    def amplitude_on(self, p_s_values, p_i_values):
        p_s_values = np.asarray(p_s_values, dtype=float)
        p_i_values = np.asarray(p_i_values, dtype=float)
        e_s = self._kernel(p_s_values, self.position.axis_a.points)
        e_i = self._kernel(p_i_values, self.position.axis_b.points)
        return (e_s @ self.position.values @ e_i.T) * self._scale

    def amplitude(self, p_s, p_i):
        p_s, p_i = np.broadcast_arrays(np.asarray(p_s, dtype=float), np.asarray(p_i, dtype=float))
        e_s = self._kernel(p_s.ravel(), self.position.axis_a.points)
        e_i = self._kernel(p_i.ravel(), self.position.axis_b.points)
        vals = np.einsum("ka,ab,kb->k", e_s, self.position.values, e_i) * self._scale
        return vals.reshape(p_s.shape)
