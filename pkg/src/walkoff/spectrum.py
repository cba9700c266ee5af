"""Paraxial angular-spectrum propagation of a two-photon position amplitude."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import ComplexGrid2D, JointIntensity, fourier_pair

__all__ = [
    "PropagationSetting",
    "WindowingError",
    "joint_intensity",
    "propagate_angular_spectrum",
    "transfer_function",
]


class WindowingError(ValueError):
    """The field is not negligible on the edge of its sampling window."""


@dataclass(frozen=True)
class PropagationSetting:
    """Distance ``z`` (negative = back-propagation) and signal/idler wavenumber ``k``."""

    z: float
    k: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.z):
            raise ValueError(f"z must be finite, got {self.z!r}")
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError(f"k must be positive, got {self.k!r}")

    @property
    def mu(self) -> float:
        return self.z / self.k


def transfer_function(p_s, p_i, setting: PropagationSetting):
    """``exp(-i z (p_s^2 + p_i^2) / (2 k))``; moves momentum ``p`` by ``+z p / k``."""
    return np.exp(-0.5j * setting.mu * (np.asarray(p_s) ** 2 + np.asarray(p_i) ** 2))


def propagate_angular_spectrum(state, setting: PropagationSetting, *,
                               boundary_tol: float = 1e-4) -> ComplexGrid2D:
    """Propagate a position amplitude by ``z``.

    ``state`` may be an ``AnsatzPositionState`` or a bare ``ComplexGrid2D``.
    The transform is periodic on the sampling window, so the field must be
    negligible on the window edge (``boundary_tol`` relative to the peak).
    """
    grid = state.grid if hasattr(state, "grid") else state
    ratio = grid.boundary_ratio()
    if ratio > boundary_tol:
        raise WindowingError(
            f"field on the window edge is {ratio:.3g} of its peak (tolerance {boundary_tol:g}); "
            "use a larger axis"
        )
    if setting.z == 0:
        return grid
    spectrum = fourier_pair(grid, "forward")
    kernel = transfer_function(spectrum.axis_a.points[:, None], spectrum.axis_b.points[None, :], setting)
    moved = ComplexGrid2D(spectrum.axis_a, spectrum.axis_b, spectrum.values * kernel)
    return fourier_pair(moved, "inverse", axes=(grid.axis_a, grid.axis_b))


def joint_intensity(grid: ComplexGrid2D, **meta) -> JointIntensity:
    """``|psi|^2`` normalized to unit sum."""
    power = np.abs(grid.values) ** 2
    total = power.sum()
    if not total > 0:
        raise ValueError("cannot form a joint intensity from an all-zero field")
    return JointIntensity(grid.axis_a, grid.axis_b, power / total, {"source": "spectrum", **meta})
