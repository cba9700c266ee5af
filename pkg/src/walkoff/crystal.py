"""Walk-off and phase-matching coefficients of a uniaxial crystal slab.

Refractive indices are direct inputs (evaluated at the pump wavelength);
no dispersion model is assumed.  All quantities are SI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CrystalSpec",
    "WalkoffParams",
    "derive_walkoff_params",
    "extraordinary_index",
    "transverse_walkoff",
    "max_walkoff_angle",
]


@dataclass(frozen=True)
class CrystalSpec:
    """Physical crystal inputs.

    Attributes
    ----------
    L : crystal length [m]
    theta : angle between optic axis and pump propagation [rad]
    n_o, n_e : ordinary / extraordinary indices at the pump wavelength
    k_p : pump wavenumber [rad/m]
    """

    L: float
    theta: float
    n_o: float
    n_e: float
    k_p: float

    def __post_init__(self):
        checks = {
            "L": self.L > 0,
            "theta": 0.0 <= self.theta <= math.pi / 2,
            "n_o": self.n_o > 1,
            "n_e": self.n_e > 1,
            "k_p": self.k_p > 0,
        }
        for name, ok in checks.items():
            value = getattr(self, name)
            if not (math.isfinite(value) and ok):
                raise ValueError(f"CrystalSpec.{name} is out of range: {value!r}")


@dataclass(frozen=True)
class WalkoffParams:
    t: float
    l: float
    eta_p: float
    beta: float
    n_theta: float
    n_bar: float


def extraordinary_index(theta, n_o: float, n_e: float):
    """``n(theta)`` with ``n^2 = n_o^2 sin^2 theta + n_e^2 cos^2 theta``."""
    theta = np.asarray(theta, dtype=float)
    return np.sqrt(n_o**2 * np.sin(theta) ** 2 + n_e**2 * np.cos(theta) ** 2)


def transverse_walkoff(theta, L: float, n_o: float, n_e: float):
    """Transverse walk-off length ``t`` as a function of the cut angle."""
    theta = np.asarray(theta, dtype=float)
    n2 = extraordinary_index(theta, n_o, n_e) ** 2
    return L * (n_o**2 - n_e**2) * np.sin(theta) * np.cos(theta) / (2.0 * n2)


def derive_walkoff_params(spec: CrystalSpec) -> WalkoffParams:
    n_theta = float(extraordinary_index(spec.theta, spec.n_o, spec.n_e))
    n_bar = 0.5 * (spec.n_o + spec.n_e)
    eta_p = spec.n_o * spec.n_e / n_theta
    s, c = math.sin(spec.theta), math.cos(spec.theta)
    t = spec.L * (spec.n_o**2 - spec.n_e**2) * s * c / (2.0 * n_theta**2)
    l = spec.L * spec.k_p * (eta_p - n_bar) / 2.0
    beta = spec.L / (4.0 * eta_p * spec.k_p)
    return WalkoffParams(t=t, l=l, eta_p=eta_p, beta=beta, n_theta=n_theta, n_bar=n_bar)


def max_walkoff_angle(n_o: float, n_e: float) -> float:
    """Cut angle in ``(0, pi/2)`` maximizing ``|t(theta)|``: ``tan theta = n_e / n_o``."""
    return math.atan(n_e / n_o)
