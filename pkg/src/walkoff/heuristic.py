"""Closed-form anti-correlation width model.

The difference-coordinate width after free propagation is estimated from the
first zero of the phase-matching sinc, with the sum momentum tied to the sum
coordinate through the ray relation ``p_+ = k (x_+ - w_p) / z``.  The model
is qualitative; inputs outside its validity region raise
:class:`OutOfValidityError` rather than being clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "HeuristicParams",
    "OutOfValidityError",
    "anti_correlation_width",
    "asymmetry_map",
    "momentum_width_estimate",
    "width_from_spreads",
]


class OutOfValidityError(ValueError):
    """The heuristic has no real solution for the given inputs."""


@dataclass(frozen=True)
class HeuristicParams:
    w_phi: float
    beta: float
    t: float
    l: float
    k: float
    w_p: float

    def __post_init__(self):
        for name in ("w_phi", "beta", "k", "w_p"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not (math.isfinite(self.t) and math.isfinite(self.l)):
            raise ValueError("t and l must be finite")

    @property
    def z_eff(self) -> float:
        return self.k * math.sqrt(self.beta) * self.w_phi / 2.0


def width_from_spreads(z, dx0, dp0, k):
    """Free-space spread ``sqrt(dx0^2 + (z/k)^2 dp0^2)``."""
    dx0 = np.asarray(dx0, dtype=float)
    dp0 = np.asarray(dp0, dtype=float)
    if np.any(dx0 < 0) or np.any(dp0 < 0):
        raise ValueError("initial spreads must be nonnegative")
    return np.sqrt(dx0**2 + (np.asarray(z, dtype=float) / k) ** 2 * dp0**2)


def momentum_width_estimate(p_plus, params: HeuristicParams):
    """``2 sqrt((pi + l - t p_+) / beta)``, the first-zero momentum width."""
    radicand = math.pi + params.l - params.t * np.asarray(p_plus, dtype=float)
    if np.any(radicand < 0):
        raise OutOfValidityError(
            f"pi + l - t p_+ is negative (min {np.min(radicand):.4g}); the sinc has no first zero there"
        )
    return 2.0 * np.sqrt(radicand / params.beta)


def anti_correlation_width(z, x_plus, params: HeuristicParams):
    """Width of the difference-coordinate correlation at distance ``z`` and sum coordinate ``x_+``.

    ``z = 0`` returns ``w_phi`` (the walk-off term vanishes linearly in z).
    """
    z, x_plus = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(x_plus, dtype=float))
    ratio2 = (z / params.z_eff) ** 2
    walk = params.t * params.k * (x_plus - params.w_p)
    # z^2 * (pi + l) - z * t k (x_+ - w_p), written without dividing by z
    correction = (ratio2 * (math.pi + params.l) - z * walk / params.z_eff**2)
    inside = 1.0 + correction
    if np.any(inside < 0):
        bad = np.argmin(inside)
        raise OutOfValidityError(
            f"width is complex at z={z.flat[bad]!r}, x_plus={x_plus.flat[bad]!r} "
            f"(radicand {inside.flat[bad]:.4g})"
        )
    out = params.w_phi * np.sqrt(inside)
    return float(out) if out.ndim == 0 else out


def asymmetry_map(z_values, x_plus_values, params: HeuristicParams) -> np.ndarray:
    """Normalized difference to the walk-off-free width, indexed ``[z, x_+]``."""
    zz, xx = np.meshgrid(np.asarray(z_values, float), np.asarray(x_plus_values, float), indexing="ij")
    with_walk = anti_correlation_width(zz, xx, params)
    without = anti_correlation_width(zz, xx, replace(params, t=0.0))
    return (with_walk - without) / (with_walk + without)
