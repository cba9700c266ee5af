"""Section extraction, sinc^2 fitting, width maps and post-selected profiles.

All operations act on :class:`~walkoff.grids.JointIntensity`, whether it
comes from a simulation or from an ingested coincidence histogram.

Cut conventions (``c`` is the intercept of the cut line):

* ``CutKind.FIXED_SUM``:        ``x_i = -x_s + c``, sampled along ``x_-``
* ``CutKind.FIXED_DIFFERENCE``: ``x_i =  x_s + c``, sampled along ``x_+``

so a fixed-sum cut at sum coordinate ``x_+`` uses ``c = sqrt(2) x_+``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, optimize

from .grids import JointIntensity
from .state import sinc

__all__ = [
    "CutKind",
    "DegenerateProfileError",
    "EmptyCutError",
    "FitFailedError",
    "JointIntensity",
    "SectionFit",
    "SectionProfile",
    "WIDTH_TABLE_HEADER",
    "WidthRow",
    "extract_section",
    "fit_sinc2",
    "format_width_table",
    "postselect_profile",
    "profile_sup_difference",
    "sinc2_model",
    "width_map",
]

DEFAULT_C_STEP = 233e-6
WIDTH_TABLE_HEADER = ("z", "c", "A", "B", "width", "amplitude", "residual_rms", "flags")

# sinc(u)^2 = 1/2 at u = HALF_POWER_ARG
HALF_POWER_ARG = optimize.brentq(lambda u: math.sin(u) / u - math.sqrt(0.5), 0.5, 2.5, xtol=1e-15)
START_LADDER = (0.25, 0.5, 1.0, 2.0, 4.0)


class EmptyCutError(ValueError):
    """The cut line does not intersect the sampled domain."""


class DegenerateProfileError(ValueError):
    """The profile has no usable structure (flat, empty or too short)."""


class FitFailedError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual rms {best_residual:.4g})")
        self.best_residual = best_residual


class CutKind(enum.Enum):
    FIXED_SUM = "fixed-sum"
    FIXED_DIFFERENCE = "fixed-difference"


@dataclass(frozen=True)
class SectionProfile:
    """Values sampled along a straight cut; ``coordinate`` is arc length from the chord midpoint."""

    offset_c: float
    coordinate: np.ndarray
    values: np.ndarray
    cut_kind: CutKind
    center: tuple = (0.0, 0.0)
    mass: float = float("nan")

    def __post_init__(self):
        coordinate = np.asarray(self.coordinate, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if coordinate.shape != values.shape or coordinate.ndim != 1:
            raise ValueError("coordinate and values must be 1D arrays of equal length")
        if coordinate.size > 1 and np.any(np.diff(coordinate) <= 0):
            raise ValueError("coordinate must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("profile values must be finite and nonnegative")
        object.__setattr__(self, "coordinate", coordinate)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SectionFit:
    A: float
    B: float
    amplitude: float
    residual_rms: float
    width: float
    width_err: float = float("nan")
    centroid: float = 0.0
    param_err: tuple = (float("nan"),) * 3
    converged: bool = True
    flags: tuple = ()

    def model(self, x):
        return sinc2_model(np.asarray(x, dtype=float) - self.centroid, self.amplitude, self.A, self.B)


def _direction(kind: CutKind):
    r = 1.0 / math.sqrt(2.0)
    if kind == CutKind.FIXED_SUM:
        return (r, -r)
    return (r, r)


def _base_point(c: float, kind: CutKind):
    if kind == CutKind.FIXED_SUM:
        return (0.5 * c, 0.5 * c)
    return (-0.5 * c, 0.5 * c)


def _chord(base, direction, lo, hi):
    """Parameter interval of ``base + s * direction`` inside the box ``lo <= x <= hi``."""
    s_lo, s_hi = -math.inf, math.inf
    for b, d, a0, a1 in zip(base, direction, lo, hi):
        if d == 0:
            if not a0 <= b <= a1:
                return None
            continue
        t0, t1 = (a0 - b) / d, (a1 - b) / d
        s_lo, s_hi = max(s_lo, min(t0, t1)), min(s_hi, max(t0, t1))
    if s_lo > s_hi:
        return None
    return s_lo, s_hi


def extract_section(g: JointIntensity, c: float, kind: CutKind = CutKind.FIXED_SUM,
                    step: float | None = None) -> SectionProfile:
    """Sample ``g`` along a cut line by bilinear interpolation."""
    kind = CutKind(kind)
    ax_s, ax_i = g.x_s_axis, g.x_i_axis
    step = step if step is not None else min(ax_s.spacing, ax_i.spacing)
    if not step > 0:
        raise ValueError("step must be positive")
    direction = _direction(kind)
    base = _base_point(c, kind)
    chord = _chord(base, direction, (ax_s.first, ax_i.first), (ax_s.last, ax_i.last))
    if chord is None:
        raise EmptyCutError(f"cut {kind.value} c={c!r} does not intersect the domain")
    s_lo, s_hi = chord
    s_mid = 0.5 * (s_lo + s_hi)
    k = math.floor(0.5 * (s_hi - s_lo) / step + 1e-9)
    coordinate = np.arange(-k, k + 1) * step
    s = s_mid + coordinate
    xs = base[0] + s * direction[0]
    xi = base[1] + s * direction[1]
    coords = np.stack([ax_s.index_of(xs), ax_i.index_of(xi)])
    values = ndimage.map_coordinates(g.counts, coords, order=1, mode="nearest")
    center = (base[0] + s_mid * direction[0], base[1] + s_mid * direction[1])
    values = np.clip(values, 0.0, None)
    return SectionProfile(c, coordinate, values, kind, center, float(values.sum()))


def postselect_profile(g: JointIntensity, c: float, step: float | None = None) -> SectionProfile:
    """Profile along ``x_+`` for pairs with ``x_i = x_s + c``, normalized to unit sum.

    The unnormalized sum is kept in ``mass``.
    """
    raw = extract_section(g, c, CutKind.FIXED_DIFFERENCE, step)
    if not raw.mass > 0:
        raise DegenerateProfileError(f"post-selection at c={c!r} captures no counts")
    return SectionProfile(c, raw.coordinate, raw.values / raw.mass, raw.cut_kind, raw.center, raw.mass)


def profile_sup_difference(a: SectionProfile, b: SectionProfile) -> float:
    """Sup-norm difference of two profiles of the same cut kind, relative to the larger peak.

    Both profiles are placed on absolute position along the cut direction and
    compared on the overlap of their coordinates (``b`` is linearly interpolated).
    """
    if a.cut_kind != b.cut_kind:
        raise ValueError("profiles come from different cut kinds")
    d = _direction(a.cut_kind)
    pos_a = a.coordinate + a.center[0] * d[0] + a.center[1] * d[1]
    pos_b = b.coordinate + b.center[0] * d[0] + b.center[1] * d[1]
    lo, hi = max(pos_a[0], pos_b[0]), min(pos_a[-1], pos_b[-1])
    inside = (pos_a >= lo - 1e-12) & (pos_a <= hi + 1e-12)
    if not inside.any():
        raise EmptyCutError("profiles do not overlap")
    other = np.interp(pos_a[inside], pos_b, b.values)
    peak = max(a.values.max(), b.values.max())
    return float(np.abs(a.values[inside] - other).max() / peak)


def _dsinc(u):
    """Derivative of the unnormalized sinc."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = np.abs(u) < 1e-4
    us = u[small]
    out[small] = -us / 3.0 + us**3 / 30.0
    ub = u[~small]
    out[~small] = (np.cos(ub) - np.sin(ub) / ub) / ub
    return out


def sinc2_model(x, amplitude, A, B):
    return amplitude * sinc(A * np.asarray(x) ** 2 - B) ** 2


def _jacobian(x, amplitude, A, B):
    u = A * x**2 - B
    s = sinc(u)
    ds = _dsinc(u)
    return np.stack([s**2, amplitude * 2 * s * ds * x**2, -amplitude * 2 * s * ds], axis=1)


def _initial_B(ratio: float) -> float:
    """Principal-branch solution of ``sinc(B)^2 = ratio`` on ``[0, pi)``."""
    if ratio >= 1.0 - 1e-12:
        return 0.0
    if ratio <= 0.0:
        return math.pi * (1 - 1e-9)
    return optimize.brentq(lambda b: sinc(b) ** 2 - ratio, 0.0, math.pi, xtol=1e-14)


def _lm(x, y, w, theta, max_iter=200, rtol=1e-9):
    """Damped Gauss-Newton (Levenberg-Marquardt) on ``amplitude * sinc^2(A x^2 - B)``."""
    theta = np.array(theta, dtype=float)

    def cost_of(th):
        r = (sinc2_model(x, *th) - y) * w
        return float(r @ r), r

    cost, r = cost_of(theta)
    lam = 1e-3
    for _ in range(max_iter):
        J = _jacobian(x, *theta) * w[:, None]
        JTJ = J.T @ J
        grad = J.T @ r
        improved = False
        while lam < 1e16:
            lhs = JTJ + lam * np.diag(np.maximum(np.diag(JTJ), 1e-300))
            try:
                delta = -np.linalg.solve(lhs, grad)
            except np.linalg.LinAlgError:
                lam *= 4.0
                continue
            trial = theta + delta
            if trial[1] > 0:
                trial_cost, trial_r = cost_of(trial)
                if trial_cost <= cost:
                    improved = True
                    break
            lam *= 4.0
        if not improved:
            # no descent direction left at working precision: stationary point
            return theta, cost, True
        change = np.max(np.abs(delta) / np.maximum(np.abs(trial), 1e-300))
        theta, cost, r = trial, trial_cost, trial_r
        lam = max(lam / 3.0, 1e-12)
        if change < rtol or cost == 0.0:
            return theta, cost, True
    return theta, cost, False


def _half_max_halfwidth(amplitude, A, B):
    """Half width at half maximum of the fitted curve (used when no real first zero exists)."""
    x_peak = math.sqrt(max(B, 0.0) / A)
    peak = sinc2_model(x_peak, amplitude, A, B)
    hi = x_peak + 1.0 / math.sqrt(A)
    while sinc2_model(hi, amplitude, A, B) > 0.5 * peak:
        hi *= 2.0
    return optimize.brentq(lambda v: sinc2_model(v, amplitude, A, B) - 0.5 * peak, x_peak, hi)


def fit_sinc2(profile: SectionProfile, *, poisson: bool = False,
              starts=START_LADDER) -> SectionFit:
    """Least-squares fit of ``amplitude * sinc^2(A x^2 - B)`` to a centroid-centred profile.

    Five starts spread ``A`` over ``[A0 / 4, 4 A0]``; the lowest residual wins.
    ``poisson=True`` weights samples by ``1 / max(value, 1)``.
    """
    x_raw = profile.coordinate
    y = profile.values
    if y.size < 8:
        raise DegenerateProfileError(f"profile has {y.size} samples, at least 8 are needed")
    total = y.sum()
    if not total > 0:
        raise DegenerateProfileError("profile has no mass")
    peak = y.max()
    if peak - y.min() <= 1e-12 * peak:
        raise DegenerateProfileError("profile is flat")
    centroid = float(np.sum(x_raw * y) / total)
    x = x_raw - centroid
    w = 1.0 / np.sqrt(np.maximum(y, 1.0)) if poisson else np.ones_like(y)

    order = np.argsort(x)
    ratio = float(np.interp(0.0, x[order], y[order])) / peak
    B0 = _initial_B(ratio)
    above = np.abs(x[y >= 0.5 * peak])
    x_half = above.max() if above.size and above.max() > 0 else np.abs(np.diff(x_raw)).min()
    A0 = (B0 + HALF_POWER_ARG) / x_half**2

    results = [_lm(x, y, w, (peak, A0 * factor, B0)) for factor in starts]
    converged = [r for r in results if r[2]]
    if not converged:
        theta = min(results, key=lambda r: r[1])[0]
        rms = float(np.sqrt(np.mean((sinc2_model(x, *theta) - y) ** 2)))
        raise FitFailedError("no start converged", rms)
    theta, cost, _ = min(converged, key=lambda r: r[1])
    amplitude, A, B = (float(v) for v in theta)
    rms = float(np.sqrt(np.mean((sinc2_model(x, amplitude, A, B) - y) ** 2)))

    J = _jacobian(x, amplitude, A, B) * w[:, None]
    dof = max(y.size - 3, 1)
    try:
        cov = np.linalg.inv(J.T @ J) * (cost / dof)
        perr = tuple(float(math.sqrt(max(v, 0.0))) for v in np.diag(cov))
    except np.linalg.LinAlgError:
        cov = None
        perr = (float("nan"),) * 3
    flags = []
    if B > -math.pi:
        width = math.sqrt((math.pi + B) / A)
        if cov is not None:
            grad = np.array([0.0, -width / (2 * A), 1.0 / (2 * A * width)])
            width_err = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
        else:
            width_err = float("nan")
    else:
        width = _half_max_halfwidth(amplitude, A, B)
        width_err = float("nan")
        flags.append("half_max_width")
    return SectionFit(A, B, amplitude, rms, width, width_err, centroid, perr, True, tuple(flags))


@dataclass(frozen=True)
class WidthRow:
    z: float
    c: float
    A: float
    B: float
    width: float
    amplitude: float
    residual_rms: float
    flags: tuple = ()
    width_err: float = float("nan")

    @property
    def ok(self) -> bool:
        return not any(f.startswith("fit_failed") for f in self.flags)


def _plane_z(g: JointIntensity) -> float:
    for key in ("z", "mu"):
        if key in g.meta:
            return float(g.meta[key])
    return float("nan")


def _fit_cell(g, c, kind, step, poisson) -> WidthRow:
    z = _plane_z(g)
    nan = float("nan")
    try:
        fit = fit_sinc2(extract_section(g, c, kind, step), poisson=poisson)
    except (EmptyCutError, DegenerateProfileError, FitFailedError) as exc:
        reason = type(exc).__name__.replace("Error", "")
        return WidthRow(z, c, nan, nan, nan, nan, getattr(exc, "best_residual", nan),
                        (f"fit_failed:{reason}",))
    return WidthRow(z, c, fit.A, fit.B, fit.width, fit.amplitude, fit.residual_rms, fit.flags,
                    fit.width_err)


def default_offsets(g: JointIntensity, c_step: float, kind: CutKind = CutKind.FIXED_SUM):
    """Offsets ``c = k * c_step`` whose cuts intersect the domain of ``g``."""
    ax_s, ax_i = g.x_s_axis, g.x_i_axis
    if kind == CutKind.FIXED_SUM:
        lo, hi = ax_s.first + ax_i.first, ax_s.last + ax_i.last
    else:
        lo, hi = ax_i.first - ax_s.last, ax_i.last - ax_s.first
    k = np.arange(math.ceil(lo / c_step), math.floor(hi / c_step) + 1)
    return k * c_step


def width_map(series, c_values=None, *, c_step: float = DEFAULT_C_STEP,
              kind: CutKind = CutKind.FIXED_SUM, step: float | None = None,
              poisson: bool = False, threads: int = 1) -> list[WidthRow]:
    """Fit every ``(plane, c)`` cell; failed cells are flagged, never dropped.

    Rows are ordered by plane (input order) then by ``c``.
    """
    kind = CutKind(kind)
    cells = []
    for g in series:
        offsets = c_values if c_values is not None else default_offsets(g, c_step, kind)
        cells.extend((g, float(c)) for c in offsets)

    def run(cell):
        return _fit_cell(cell[0], cell[1], kind, step, poisson)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, cells))
    return [run(cell) for cell in cells]


def format_width_table(rows, units: str = "z [m], c [m], A [1/m^2], B [1], width [m], "
                                          "amplitude [counts], residual_rms [counts]") -> str:
    buf = io.StringIO()
    buf.write(f"# units: {units}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(WIDTH_TABLE_HEADER)
    for row in rows:
        writer.writerow([repr(float(row.z)), repr(float(row.c)), repr(float(row.A)), repr(float(row.B)),
                         repr(float(row.width)), repr(float(row.amplitude)),
                         repr(float(row.residual_rms)), ";".join(row.flags)])
    return buf.getvalue()
