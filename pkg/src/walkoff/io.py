"""File formats: joint-intensity matrices, run configs and manifests.

Matrix files are plain text.  Header lines start with ``#`` and carry
``key: value`` pairs; ``x_s_axis`` and ``x_i_axis`` (``min max n``) are
mandatory, ``z`` and ``magnification`` optional.  Data rows follow, one per
``x_s`` sample, separated by whitespace or commas.  Floats are written with
``repr`` so a write/read round trip is lossless.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .grids import Axis, JointIntensity

__all__ = [
    "ConfigError",
    "HistogramParseError",
    "atomic_write_bytes",
    "atomic_write_text",
    "format_histogram",
    "read_config",
    "read_histogram",
    "sha256_of",
    "write_histogram",
    "write_manifest",
]

_AXIS_KEYS = ("x_s_axis", "x_i_axis")
_UMASK = os.umask(0)
os.umask(_UMASK)
_FLOAT_KEYS = ("z", "magnification")


class HistogramParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


class ConfigError(ValueError):
    """Invalid run configuration; the message is a single line."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config-error key={key} reason={message}")
        self.key = key


def atomic_write_bytes(path, data: bytes) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def sha256_of(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fmt(x: float) -> str:
    return repr(float(x))


def format_histogram(g: JointIntensity, delimiter: str = ",") -> str:
    lines = [
        f"# x_s_axis: {_fmt(g.x_s_axis.min)} {_fmt(g.x_s_axis.max)} {g.x_s_axis.n}",
        f"# x_i_axis: {_fmt(g.x_i_axis.min)} {_fmt(g.x_i_axis.max)} {g.x_i_axis.n}",
    ]
    for key in _FLOAT_KEYS:
        if key in g.meta and g.meta[key] is not None:
            lines.append(f"# {key}: {_fmt(g.meta[key])}")
    for key in sorted(set(g.meta) - set(_FLOAT_KEYS)):
        value = g.meta[key]
        if isinstance(value, float):
            value = _fmt(value)
        lines.append(f"# {key}: {value}")
    lines.extend(delimiter.join(_fmt(v) for v in row) for row in g.counts)
    return "\n".join(lines) + "\n"


def write_histogram(path, g: JointIntensity, delimiter: str = ",") -> Path:
    return atomic_write_text(path, format_histogram(g, delimiter))


def _parse_float(token: str, path, lineno: int) -> float:
    # float() accepts only '.' as the decimal mark, independent of locale
    try:
        return float(token)
    except ValueError:
        raise HistogramParseError(path, lineno, f"not a number: {token!r}") from None


def read_histogram(path, *, apply_magnification: bool = False) -> JointIntensity:
    """Read a matrix file into a :class:`JointIntensity`.

    With ``apply_magnification`` the axes are divided by the ``magnification``
    header value, converting camera-plane coordinates to the object plane.
    """
    path = Path(path)
    header: dict[str, str] = {}
    header_line: dict[str, int] = {}
    rows: list[list[float]] = []
    row_lines: list[int] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" not in body:
                    continue  # free comment
                key, _, value = body.partition(":")
                header[key.strip()] = value.strip()
                header_line[key.strip()] = lineno
                continue
            tokens = line.replace(",", " ").split()
            values = [_parse_float(tok, path, lineno) for tok in tokens]
            for v in values:
                if not np.isfinite(v):
                    raise HistogramParseError(path, lineno, f"non-finite count {v!r}")
                if v < 0:
                    raise HistogramParseError(path, lineno, f"negative count {v!r}")
            rows.append(values)
            row_lines.append(lineno)

    axes = []
    for key in _AXIS_KEYS:
        if key not in header:
            raise HistogramParseError(path, 1, f"missing header '# {key}: min max n'")
        parts = header[key].split()
        lineno = header_line[key]
        if len(parts) != 3:
            raise HistogramParseError(path, lineno, f"{key} needs 'min max n', got {header[key]!r}")
        lo, hi = (_parse_float(p, path, lineno) for p in parts[:2])
        try:
            n = int(parts[2])
        except ValueError:
            raise HistogramParseError(path, lineno, f"{key} count is not an integer: {parts[2]!r}") from None
        try:
            axes.append(Axis(lo, hi, n))
        except ValueError as exc:
            raise HistogramParseError(path, lineno, str(exc)) from None
    ax_s, ax_i = axes

    if len(rows) != ax_s.n:
        where = row_lines[-1] if rows else max(header_line.values())
        raise HistogramParseError(path, where, f"expected {ax_s.n} data rows, found {len(rows)}")
    for values, lineno in zip(rows, row_lines):
        if len(values) != ax_i.n:
            raise HistogramParseError(path, lineno, f"expected {ax_i.n} columns, found {len(values)}")

    meta: dict = {"source": str(path)}
    for key, value in header.items():
        if key in _AXIS_KEYS:
            continue
        meta[key] = _parse_float(value, path, header_line[key]) if key in _FLOAT_KEYS else value
    try:
        g = JointIntensity(ax_s, ax_i, np.array(rows, dtype=float), meta)
    except ValueError as exc:
        raise HistogramParseError(path, row_lines[0], str(exc)) from None
    if apply_magnification:
        mag = meta.get("magnification")
        if mag is None:
            raise HistogramParseError(path, 1, "magnification requested but no '# magnification:' header")
        if not mag > 0:
            raise HistogramParseError(path, header_line["magnification"], "magnification must be positive")
        g = g.scaled_axes(1.0 / mag).with_meta(object_plane=True)
    return g


def read_config(path) -> configparser.ConfigParser:
    """Parse an INI-style ``key = value`` file with ``[sections]``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("--config", f"file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (M, N, L)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError("--config", " ".join(str(exc).split())) from None
    return parser


def write_manifest(out_dir, *, verb: str, config: dict, files, units: str, warnings=()) -> Path:
    """Write ``manifest.json`` (config echo, units mode and output checksums) last."""
    out_dir = Path(out_dir)
    entries = [{"file": Path(f).name, "sha256": sha256_of(f)} for f in files]
    manifest = {
        "verb": verb,
        "units": units,
        "config": config,
        "outputs": entries,
        "warnings": list(warnings),
    }
    return atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
