"""Uniform sampling grids, coordinate frames and the unitary Fourier pair.

Every engine in the package samples fields at cell midpoints of a uniform
partition of ``[min, max)``.  Fourier transforms are scaled so that they
approximate the continuous unitary transform

    F(k) = (2 pi)^(-1/2) \\int f(x) exp(-i k x) dx

per dimension, which makes the discrete Parseval identity read
``sum |f|^2 dx_a dx_b == sum |F|^2 dk_a dk_b`` with no extra factors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import ndimage

__all__ = [
    "Axis",
    "ComplexGrid2D",
    "CoordinateFrame",
    "DomainMismatchError",
    "JointIntensity",
    "fourier_pair",
    "rotate_frame",
    "to_sum_difference",
]

SQRT2 = math.sqrt(2.0)


class DomainMismatchError(ValueError):
    """Raised when two grids (or the two axes of one grid) are incompatible."""


@dataclass(frozen=True)
class Axis:
    """Uniform axis sampled at the midpoints of ``n`` equal cells of ``[min, max)``."""

    min: float
    max: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError("Axis bounds must be finite")
        if not self.max > self.min:
            raise ValueError(f"Axis requires max > min, got min={self.min}, max={self.max}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"Axis requires an integer n >= 2, got n={self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "min", float(self.min))
        object.__setattr__(self, "max", float(self.max))

    @classmethod
    def symmetric(cls, half_width: float, n: int) -> "Axis":
        """Axis over ``[-half_width, half_width)``."""
        return cls(-half_width, half_width, n)

    @classmethod
    def centered(cls, spacing: float, n: int) -> "Axis":
        """Axis whose points are ``(j - n // 2) * spacing``; it always contains 0."""
        first = -(n // 2) * spacing
        return cls(first - 0.5 * spacing, first + (n - 0.5) * spacing, n)

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / self.n

    @property
    def points(self) -> np.ndarray:
        return self.min + (np.arange(self.n) + 0.5) * self.spacing

    @property
    def first(self) -> float:
        return self.min + 0.5 * self.spacing

    @property
    def last(self) -> float:
        return self.max - 0.5 * self.spacing

    @property
    def is_symmetric(self) -> bool:
        return math.isclose(self.min, -self.max, rel_tol=1e-12, abs_tol=1e-12 * self.spacing)

    def conjugate(self) -> "Axis":
        """Centered frequency axis with spacing ``2 pi / (n * spacing)``."""
        return Axis.centered(2.0 * math.pi / (self.n * self.spacing), self.n)

    def scaled(self, factor: float) -> "Axis":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return Axis(self.min * factor, self.max * factor, self.n)

    def index_of(self, x):
        """Fractional sample index of coordinate ``x`` (0 at the first midpoint)."""
        return (np.asarray(x, dtype=float) - self.first) / self.spacing

    def same_as(self, other: "Axis", rtol: float = 1e-12) -> bool:
        scale = max(abs(self.min), abs(self.max), self.spacing)
        return (
            self.n == other.n
            and abs(self.min - other.min) <= rtol * scale
            and abs(self.max - other.max) <= rtol * scale
        )


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class ComplexGrid2D:
    """Complex amplitudes sampled on ``axis_a x axis_b`` (first index follows ``axis_a``)."""

    axis_a: Axis
    axis_b: Axis
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.axis_a.n, self.axis_b.n):
            raise ValueError(
                f"values shape {values.shape} does not match axes ({self.axis_a.n}, {self.axis_b.n})"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid amplitudes must be finite")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def is_square(self) -> bool:
        return self.axis_a.same_as(self.axis_b)

    def norm2(self) -> float:
        """Squared L2 norm including the cell area."""
        return float(np.sum(np.abs(self.values) ** 2) * self.axis_a.spacing * self.axis_b.spacing)

    def boundary_ratio(self) -> float:
        """Largest amplitude on the outer ring relative to the overall peak."""
        mag = np.abs(self.values)
        peak = mag.max()
        if peak == 0:
            return 0.0
        ring = max(mag[0].max(), mag[-1].max(), mag[:, 0].max(), mag[:, -1].max())
        return float(ring / peak)


@dataclass(frozen=True)
class JointIntensity:
    """Nonnegative joint distribution over ``(x_s, x_i)``.

    The same container is reused for momentum marginals, in which case the
    two axes carry ``p_s`` and ``p_i``.
    """

    x_s_axis: Axis
    x_i_axis: Axis
    counts: np.ndarray
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.shape != (self.x_s_axis.n, self.x_i_axis.n):
            raise ValueError(
                f"counts shape {counts.shape} does not match axes ({self.x_s_axis.n}, {self.x_i_axis.n})"
            )
        if not np.all(np.isfinite(counts)):
            raise ValueError("counts must be finite")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if not np.any(counts > 0):
            raise ValueError("counts are all zero")
        object.__setattr__(self, "counts", _frozen(counts))
        object.__setattr__(self, "meta", dict(self.meta))

    def normalized(self) -> "JointIntensity":
        return JointIntensity(self.x_s_axis, self.x_i_axis, self.counts / self.counts.sum(), self.meta)

    def with_meta(self, **extra) -> "JointIntensity":
        return JointIntensity(self.x_s_axis, self.x_i_axis, self.counts, {**self.meta, **extra})

    def scaled_axes(self, factor: float) -> "JointIntensity":
        """Rescale both coordinate axes (e.g. camera plane to object plane)."""
        return JointIntensity(
            self.x_s_axis.scaled(factor), self.x_i_axis.scaled(factor), self.counts, self.meta
        )

    def total(self) -> float:
        return float(self.counts.sum())

    def correlation_coefficient(self) -> float:
        """Pearson correlation between ``x_s`` and ``x_i`` under this distribution."""
        w = self.counts / self.counts.sum()
        xs = self.x_s_axis.points[:, None]
        xi = self.x_i_axis.points[None, :]
        ms = np.sum(w * xs)
        mi = np.sum(w * xi)
        cov = np.sum(w * (xs - ms) * (xi - mi))
        vs = np.sum(w * (xs - ms) ** 2)
        vi = np.sum(w * (xi - mi) ** 2)
        return float(cov / math.sqrt(vs * vi))


class CoordinateFrame(enum.Enum):
    SIGNAL_IDLER = "signal-idler"
    SUM_DIFFERENCE = "sum-difference"


def to_sum_difference(u_s, u_i):
    """Return ``(u_plus, u_minus)`` for signal/idler coordinates."""
    u_s = np.asarray(u_s)
    u_i = np.asarray(u_i)
    return (u_s + u_i) / SQRT2, (u_s - u_i) / SQRT2


def rotate_frame(grid: ComplexGrid2D, source: CoordinateFrame, target: CoordinateFrame) -> ComplexGrid2D:
    """Resample ``grid`` from one coordinate frame into the other.

    The 45 degree map ``(a, b) -> ((a + b)/sqrt2, (a - b)/sqrt2)`` is an
    involution, so both directions use the same resampling.  Values are
    bilinearly interpolated; points whose preimage falls outside the source
    domain are set to zero.
    """
    if not grid.is_square:
        raise DomainMismatchError("rotate_frame requires the same axis on both dimensions")
    if source == target:
        return grid
    axis = grid.axis_a
    u = axis.points
    ua, ub = np.meshgrid(u, u, indexing="ij")
    src_a, src_b = to_sum_difference(ua, ub)
    coords = np.stack([axis.index_of(src_a), axis.index_of(src_b)])
    vals = grid.values
    out = ndimage.map_coordinates(vals.real, coords, order=1, mode="constant", cval=0.0)
    out = out + 1j * ndimage.map_coordinates(vals.imag, coords, order=1, mode="constant", cval=0.0)
    return ComplexGrid2D(axis, axis, out)


def _phase_factors(src: Axis, dst: Axis, sign: int):
    """Pre/post phase vectors turning an FFT into a DFT between arbitrary offset axes.

    ``sum_i f_i exp(sign * 1j * y_j * x_i)`` over ``x = src.points`` and
    ``y = dst.points`` equals ``post * FFT_sign(pre * f)`` when
    ``src.spacing * dst.spacing == 2 pi / n``.
    """
    n = src.n
    if dst.n != n:
        raise DomainMismatchError("conjugate axes must have the same sample count")
    if not math.isclose(src.spacing * dst.spacing * n, 2.0 * math.pi, rel_tol=1e-9):
        raise DomainMismatchError("axis spacings are not Fourier conjugate (dx * dk != 2 pi / n)")
    j = np.arange(n)
    pre = np.exp(sign * 1j * dst.first * j * src.spacing)
    post = np.exp(sign * 1j * dst.points * src.first)
    return pre, post


def _transform_last2(values, axes_in, axes_out, sign: int):
    """Scaled unitary transform over the last two array dimensions."""
    (a_in, b_in), (a_out, b_out) = axes_in, axes_out
    pre_a, post_a = _phase_factors(a_in, a_out, sign)
    pre_b, post_b = _phase_factors(b_in, b_out, sign)
    work = values * pre_a[:, None] * pre_b[None, :]
    if sign < 0:
        work = np.fft.fft2(work, axes=(-2, -1))
    else:
        work = np.fft.ifft2(work, axes=(-2, -1)) * (a_in.n * b_in.n)
    scale = a_in.spacing * b_in.spacing / (2.0 * math.pi)
    return work * (post_a[:, None] * post_b[None, :]) * scale


def fourier_pair(grid: ComplexGrid2D, direction: str = "forward", axes=None) -> ComplexGrid2D:
    """Unitary 2D Fourier transform of ``grid``.

    ``direction="forward"`` uses the kernel ``exp(-i k x)``, ``"inverse"``
    uses ``exp(+i k x)``.  Output axes default to the centered conjugate
    axes; pass ``axes=(axis_a, axis_b)`` to land on a specific conjugate
    grid (for instance the original axes when inverting).
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    if axes is None:
        axes = (grid.axis_a.conjugate(), grid.axis_b.conjugate())
    sign = -1 if direction == "forward" else 1
    out = _transform_last2(grid.values, (grid.axis_a, grid.axis_b), tuple(axes), sign)
    return ComplexGrid2D(axes[0], axes[1], out)
