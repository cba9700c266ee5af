"""Four-dimensional Wigner function of a biphoton state and its free-space shear.

Layout
------
A :class:`WignerTensor` stores ``slices[n_s, n_i]``: the 2D position slice
``W(x_s, x_i; p_s[n_s], p_i[n_i])``.  ``values`` exposes the same data
indexed ``(x_s, x_i, p_s, p_i)``.

Discretization
--------------
For every outer momentum ``p`` the relative-momentum product
``Phi(p + q/2) conj(Phi(p - q/2))`` is sampled on an ``M x M`` grid
``q = (m - M/2) dq`` with ``dq = 2 P / M`` and transformed to the position
grid ``x = -M dx / 2 + (j + 1/2) dx`` with ``dx = pi / P``:

    W(x, p) = (2 pi)^-2 sum_q dq^2 exp(i x.q) Phi(p + q/2) conj(Phi(p - q/2))

Because the q grid contains ``q = 0``, summing a slice over ``x`` returns
``|Phi(p)|^2`` exactly.  The lone unpaired row/column at ``q = -P`` leaves
an imaginary residue proportional to the amplitude on the window edge; the
real part is kept.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .grids import Axis, JointIntensity, _transform_last2

__all__ = [
    "ShearSetting",
    "WignerTensor",
    "WindowTooSmallError",
    "auto_window",
    "compute_wigner",
    "load_wigner",
    "momentum_marginal",
    "position_axis",
    "position_marginal",
    "propagate_wigner",
    "q_axis",
    "save_wigner",
    "sheared_position_marginals",
]

log = logging.getLogger(__name__)

# above this many union samples the amplitude table is skipped and rows are evaluated directly
_TABLE_LIMIT = 3000
CLIP_WARN_FRACTION = 0.01
SHEAR_LOSS_WARN_FRACTION = 0.9


class WindowTooSmallError(ValueError):
    """The relative-momentum window does not contain the support of the state."""


@dataclass(frozen=True)
class ShearSetting:
    """Free-space propagation parameter ``mu = z / k``."""

    mu: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu!r}")

    @classmethod
    def from_physical(cls, z: float, k: float) -> "ShearSetting":
        if not k > 0:
            raise ValueError(f"k must be positive, got {k!r}")
        return cls(z / k)


@dataclass(frozen=True)
class WignerTensor:
    x_axis: Axis
    p_axis: Axis
    slices: np.ndarray
    mu: float = 0.0
    q_axis: Axis | None = None
    imag_residue: float = 0.0
    support_ratio: float = 0.0
    warnings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        shape = (self.p_axis.n, self.p_axis.n, self.x_axis.n, self.x_axis.n)
        if self.slices.shape != shape:
            raise ValueError(f"slices shape {self.slices.shape} != {shape}")
        if not np.all(np.isfinite(self.slices)):
            raise ValueError("Wigner values must be finite")

    @property
    def values(self) -> np.ndarray:
        """View indexed ``(x_s, x_i, p_s, p_i)``."""
        return self.slices.transpose(2, 3, 0, 1)

    @property
    def cell_volume(self) -> float:
        return self.x_axis.spacing**2 * self.p_axis.spacing**2

    def total_mass(self) -> float:
        return float(self.slices.sum(dtype=float) * self.cell_volume)


def q_axis(window: float, m: int) -> Axis:
    """Centered relative-momentum axis over ``[-P, P)`` (contains ``q = 0``)."""
    return Axis.centered(2.0 * window / m, m)


def position_axis(window: float, m: int) -> Axis:
    """Symmetric position axis conjugate to :func:`q_axis`."""
    dx = math.pi / window
    return Axis.symmetric(0.5 * m * dx, m)


def _outer_ring_max(values: np.ndarray) -> float:
    a = np.abs(values)
    return float(max(a[..., 0, :].max(), a[..., -1, :].max(), a[..., :, 0].max(), a[..., :, -1].max()))


class _SliceSource:
    """Produces the complex position slices for one outer ``p_s`` row at a time."""

    def __init__(self, state, p_axis: Axis, window: float, m: int):
        self.state = state
        self.p_axis = p_axis
        self.q = q_axis(window, m)
        self.x = position_axis(window, m)
        p = p_axis.points
        half = 0.5 * self.q.points
        self.plus = p[:, None] + half[None, :]
        self.minus = p[:, None] - half[None, :]
        self._table = None
        coords = np.concatenate([self.plus.ravel(), self.minus.ravel()])
        quantum = 1e-9 * max(p_axis.spacing, self.q.spacing)
        keys = np.round(coords / quantum).astype(np.int64)
        uniq, inverse = np.unique(keys, return_inverse=True)
        if uniq.size <= _TABLE_LIMIT:
            values = uniq * quantum
            self._table = np.asarray(state.amplitude_on(values, values))
            inverse = inverse.reshape(2, *self.plus.shape)
            self._idx_plus, self._idx_minus = inverse[0], inverse[1]

    def _block(self, n: int, which: str) -> np.ndarray:
        """Amplitudes ``[n_i, m_s, m_i]`` at ``(p_s[n] +- q_s/2, p_i[n_i] +- q_i/2)``."""
        if self._table is not None:
            idx = self._idx_plus if which == "plus" else self._idx_minus
            return self._table[idx[n][None, :, None], idx[:, None, :]]
        coords = self.plus if which == "plus" else self.minus
        flat = np.asarray(self.state.amplitude_on(coords[n], coords.ravel()))
        return flat.reshape(coords.shape[1], *coords.shape).transpose(1, 0, 2)

    def row(self, n: int):
        """Return ``(real slices [n_i, x_s, x_i], imag residue, ring max, centre max)``."""
        product = self._block(n, "plus") * np.conj(self._block(n, "minus"))
        m0 = self.q.n // 2
        centre = float(np.abs(product[:, m0, m0]).max())
        ring = _outer_ring_max(product)
        w = _transform_last2(product, (self.q, self.q), (self.x, self.x), +1) / (2.0 * math.pi)
        return np.ascontiguousarray(w.real), float(np.abs(w.imag).max()), ring, centre


def _run_rows(source: _SliceSource, consume, threads: int):
    """Apply ``consume(n, row_result)`` to every row in ascending order."""
    rows = range(source.p_axis.n)
    if threads <= 1:
        for n in rows:
            consume(n, source.row(n))
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # map preserves order, so reductions are independent of the thread count
        for n, result in zip(rows, pool.map(source.row, rows)):
            consume(n, result)


class _SupportStats:
    def __init__(self):
        self.ring = 0.0
        self.centre = 0.0
        self.imag = 0.0
        self.real = 0.0

    def update(self, slices, imag, ring, centre):
        self.ring = max(self.ring, ring)
        self.centre = max(self.centre, centre)
        self.imag = max(self.imag, imag)
        self.real = max(self.real, float(np.abs(slices).max()))

    @property
    def ratio(self) -> float:
        return self.ring / self.centre if self.centre > 0 else math.inf

    @property
    def residue(self) -> float:
        return self.imag / self.real if self.real > 0 else 0.0

    def check(self, support_tol: float):
        if self.ratio > support_tol:
            raise WindowTooSmallError(
                f"window too small: amplitude product on the q-window edge is {self.ratio:.3g} "
                f"of its peak (tolerance {support_tol:g}); increase the window P"
            )


def compute_wigner(state, p_outer: Axis, window: float, m: int | None = None, *,
                   support_tol: float = 1e-4, threads: int = 1) -> WignerTensor:
    """Wigner tensor of ``state`` on outer momenta ``p_outer``.

    Parameters
    ----------
    state
        Any object with ``amplitude_on(p_s_values, p_i_values)`` returning the
        momentum amplitude on a tensor grid (e.g. ``BiphotonMomentumState`` or
        ``SampledMomentumState``).
    p_outer
        Axis of outer momenta, shared by ``p_s`` and ``p_i`` (``N`` points).
    window
        Half width ``P`` of the relative-momentum window.
    m
        Relative-momentum (and position) sample count ``M``; defaults to the
        size of ``state.grid``.
    support_tol
        Largest allowed edge-to-peak ratio of the relative-momentum product.
    """
    if m is None:
        m = state.grid.axis_a.n
    if not window > 0:
        raise ValueError(f"window must be positive, got {window!r}")
    source = _SliceSource(state, p_outer, window, m)
    out = np.empty((p_outer.n, p_outer.n, m, m))
    stats = _SupportStats()

    def consume(n, result):
        slices, imag, ring, centre = result
        out[n] = slices
        stats.update(slices, imag, ring, centre)

    _run_rows(source, consume, threads)
    stats.check(support_tol)
    return WignerTensor(source.x, p_outer, out, 0.0, source.q, stats.residue, stats.ratio)


def auto_window(state, m: int, tol: float = 1e-4, p_max: float | None = None) -> float:
    """Smallest window ``P`` whose square edge carries less than ``tol`` of the peak amplitude.

    The result is rounded up to a whole number of the state's grid spacings.
    """
    spacing = state.grid.axis_a.spacing
    p_max = p_max if p_max is not None else 1e4 * spacing

    def edge_ratio(P):
        edge = np.linspace(-P, P, 4 * m + 1)
        ring = np.concatenate([
            state.amplitude_on(edge, [-P, P]).ravel(),
            state.amplitude_on([-P, P], edge).ravel(),
        ])
        inner = np.linspace(-P, P, 2 * m + 1)
        peak = np.abs(state.amplitude_on(inner, inner)).max()
        return np.abs(ring).max() / peak

    lo, hi = spacing, spacing
    while edge_ratio(hi) >= tol:
        lo, hi = hi, hi * 2.0
        if hi > p_max:
            raise WindowTooSmallError(f"no window below {p_max:g} satisfies edge tolerance {tol:g}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if edge_ratio(mid) < tol:
            hi = mid
        else:
            lo = mid
        if hi - lo < 0.5 * spacing:
            break
    return math.ceil(hi / spacing) * spacing


def _integer_shift(a: np.ndarray, k: int, axis: int) -> np.ndarray:
    """``out[j] = a[j - k]`` along ``axis`` with zero fill."""
    n = a.shape[axis]
    out = np.zeros_like(a)
    if abs(k) >= n:
        return out
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k >= 0:
        src[axis], dst[axis] = slice(0, n - k), slice(k, n)
    else:
        src[axis], dst[axis] = slice(-k, n), slice(0, n + k)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _linear_shift(a: np.ndarray, shift: float, axis: int) -> np.ndarray:
    """Shift by a fractional number of samples with linear interpolation."""
    k = math.floor(shift)
    f = shift - k
    out = _integer_shift(a, k, axis)
    if f:
        out *= 1.0 - f
        out += f * _integer_shift(a, k + 1, axis)
    return out


def _grouped(shifts: np.ndarray):
    """Yield ``(k, index, fraction)`` for slices sharing an integer shift."""
    base = np.floor(shifts)
    frac = shifts - base
    base = base.astype(int)
    for k in np.unique(base):
        idx = np.flatnonzero(base == k)
        yield int(k), idx, frac[idx]


def _linear_shift_stack(stack: np.ndarray, shifts: np.ndarray, axis: int) -> np.ndarray:
    """Shift ``stack[n]`` by ``shifts[n]`` samples along ``axis`` (of the full stack)."""
    out = np.zeros_like(stack)
    bshape = (-1,) + (1,) * (stack.ndim - 1)
    for k, idx, f in _grouped(shifts):
        part = stack[idx]
        w = f.reshape(bshape)
        out[idx] = (1.0 - w) * _integer_shift(part, k, axis) + w * _integer_shift(part, k + 1, axis)
    return out


def _linear_shift_sum(stack: np.ndarray, shifts: np.ndarray, axis: int) -> np.ndarray:
    """``sum_n shift(stack[n], shifts[n])``, shifting only one weighted sum per integer offset."""
    out = np.zeros(stack.shape[1:])
    for k, idx, f in _grouped(shifts):
        part = stack[idx]
        out += _integer_shift(np.tensordot(1.0 - f, part, axes=1), k, axis - 1)
        out += _integer_shift(np.tensordot(f, part, axes=1), k + 1, axis - 1)
    return out


def _spline_shift_stack(slices: np.ndarray, shift_s: float, shifts_i, order: int) -> np.ndarray:
    out = np.empty_like(slices)
    for k in range(slices.shape[0]):
        out[k] = ndimage.shift(slices[k], (shift_s, shifts_i[k]), order=order,
                               mode="grid-constant", cval=0.0, prefilter=order > 1)
    return out


def _shear_row(slices: np.ndarray, p_s: float, p_i: np.ndarray, mu: float, dx: float, order: int):
    """Shear every ``(x_s, x_i)`` slice of one ``p_s`` row: shift by ``mu p / dx`` samples."""
    if mu == 0.0:
        return slices
    if order == 1:
        moved = _linear_shift_stack(slices, mu * p_i / dx, axis=2)
        return _linear_shift(moved, mu * p_s / dx, axis=1)
    return _spline_shift_stack(slices, mu * p_s / dx, mu * p_i / dx, order)


def _shear_row_sum(slices: np.ndarray, p_s: float, p_i: np.ndarray, mu: float, dx: float, order: int):
    """``_shear_row(...).sum(axis=0)`` without materializing the sheared row."""
    if mu == 0.0:
        return slices.sum(axis=0)
    if order == 1:
        return _linear_shift(_linear_shift_sum(slices, mu * p_i / dx, axis=2), mu * p_s / dx, axis=0)
    return _shear_row(slices, p_s, p_i, mu, dx, order).sum(axis=0)


def propagate_wigner(w: WignerTensor, setting: ShearSetting, *, order: int = 1) -> WignerTensor:
    """Free-space shear ``W'(x, p) = W(x - mu p, p)`` applied to both photons.

    ``order`` selects the interpolation (1 = bilinear, 3 = cubic spline).
    """
    if order not in (1, 3):
        raise ValueError(f"order must be 1 or 3, got {order!r}")
    mu = setting.mu
    if mu == 0.0:
        return w
    p = w.p_axis.points
    dx = w.x_axis.spacing
    out = np.empty_like(w.slices)
    for n in range(w.p_axis.n):
        out[n] = _shear_row(w.slices[n], p[n], p, mu, dx, order)
    before = w.total_mass()
    after = float(out.sum()) * w.cell_volume
    warnings = w.warnings
    if before != 0 and 1.0 - after / before > SHEAR_LOSS_WARN_FRACTION:
        msg = f"shear mu={mu:g} moved {1 - after / before:.0%} of the mass out of the position window"
        log.warning(msg)
        warnings = warnings + (msg,)
    return WignerTensor(w.x_axis, w.p_axis, out, w.mu + mu, w.q_axis, w.imag_residue,
                        w.support_ratio, warnings)


def _clipped_marginal(raw: np.ndarray, axis: Axis, meta: dict) -> JointIntensity:
    negative = float(-raw[raw < 0].sum())
    total = float(np.abs(raw).sum())
    fraction = negative / total if total > 0 else 0.0
    if fraction > CLIP_WARN_FRACTION:
        log.warning("marginal integrity: %.2f%% of the mass was negative and clipped", 100 * fraction)
    meta = {**meta, "clipped_fraction": fraction, "integrity_warning": fraction > CLIP_WARN_FRACTION}
    return JointIntensity(axis, axis, np.clip(raw, 0.0, None), meta)


def position_marginal(w: WignerTensor) -> JointIntensity:
    """Integrate over ``(p_s, p_i)``; negative residues are clipped to zero."""
    raw = w.slices.sum(axis=(0, 1)) * w.p_axis.spacing**2
    return _clipped_marginal(raw, w.x_axis, {"mu": w.mu, "source": "wigner"})


def momentum_marginal(w: WignerTensor) -> JointIntensity:
    """Integrate over ``(x_s, x_i)``; axes of the result are ``(p_s, p_i)``."""
    raw = w.slices.sum(axis=(2, 3)) * w.x_axis.spacing**2
    return _clipped_marginal(raw, w.p_axis, {"mu": w.mu, "source": "wigner-momentum"})


def sheared_position_marginals(state, p_outer: Axis, window: float, mus, m: int | None = None, *,
                               order: int = 1, support_tol: float = 1e-4,
                               threads: int = 1) -> list[JointIntensity]:
    """Position marginals for several shears without storing the 4D tensor.

    Equivalent to ``position_marginal(propagate_wigner(compute_wigner(...), mu))``
    for every ``mu``, but memory scales with ``M^2`` rather than ``M^2 N^2``.
    """
    if m is None:
        m = state.grid.axis_a.n
    if order not in (1, 3):
        raise ValueError(f"order must be 1 or 3, got {order!r}")
    mus = [float(mu) for mu in mus]
    if not mus:
        raise ValueError("at least one mu value is required")
    source = _SliceSource(state, p_outer, window, m)
    p = p_outer.points
    dx = source.x.spacing
    acc = np.zeros((len(mus), m, m))
    stats = _SupportStats()

    def consume(n, result):
        slices, imag, ring, centre = result
        stats.update(slices, imag, ring, centre)
        for k, mu in enumerate(mus):
            acc[k] += _shear_row_sum(slices, p[n], p, mu, dx, order)

    _run_rows(source, consume, threads)
    stats.check(support_tol)
    meta = {"source": "wigner", "support_ratio": stats.ratio, "imag_residue": stats.residue}
    return [
        _clipped_marginal(acc[k] * p_outer.spacing**2, source.x, {**meta, "mu": mu})
        for k, mu in enumerate(mus)
    ]


def save_wigner(w: WignerTensor, path, params: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>`` (raw little-endian float64, ``(x_s, x_i, p_s, p_i)`` row-major)
    and ``<path>.txt`` (axes and parameters)."""
    path = Path(path)
    np.ascontiguousarray(w.values, dtype="<f8").tofile(path)
    lines = [
        f"x_axis: {w.x_axis.min!r} {w.x_axis.max!r} {w.x_axis.n}",
        f"p_axis: {w.p_axis.min!r} {w.p_axis.max!r} {w.p_axis.n}",
        f"mu: {w.mu!r}",
        "layout: float64 little-endian row-major (x_s, x_i, p_s, p_i)",
    ]
    for key, value in (params or {}).items():
        lines.append(f"param.{key}: {value!r}")
    sidecar = path.with_name(path.name + ".txt")
    sidecar.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path, sidecar


def load_wigner(path) -> WignerTensor:
    path = Path(path)
    header = {}
    for line in path.with_name(path.name + ".txt").read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition(":")
        header[key.strip()] = value.strip()

    def axis(key):
        lo, hi, n = header[key].split()
        return Axis(float(lo), float(hi), int(n))

    x_axis, p_axis = axis("x_axis"), axis("p_axis")
    shape = (x_axis.n, x_axis.n, p_axis.n, p_axis.n)
    values = np.fromfile(path, dtype="<f8").reshape(shape)
    slices = np.ascontiguousarray(values.transpose(2, 3, 0, 1))
    return WignerTensor(x_axis, p_axis, slices, float(header.get("mu", 0.0)))
