"""Command-line front end.

Each verb reads an INI config (``--config``) and writes CSV files, PNG heatmaps
and a ``manifest.json`` into ``--out``.  Exit codes: 0 success, 1 invalid
configuration, 2 partial failure (some planes or cells could not be produced).
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, heuristic, io, plotting, spectrum, state, wigner
from .crystal import CrystalSpec, derive_walkoff_params
from .grids import Axis, JointIntensity

log = logging.getLogger("walkoff")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2
VERBS = ("simulate-wigner", "simulate-ansatz", "heuristic-map", "fit-sections", "postselect")


class _Section:
    """Typed access to one config section; every problem becomes a ConfigError."""

    def __init__(self, parser: configparser.ConfigParser, name: str, base: Path):
        self.name = name
        self.base = base
        self.data = parser[name] if parser.has_section(name) else {}
        self.used: dict[str, str] = {}

    def _raw(self, key, default):
        if key in self.data:
            value = self.data[key].strip()
            self.used[key] = value
            return value
        if default is _REQUIRED:
            raise io.ConfigError(f"{self.name}.{key}", "missing")
        return default

    def float(self, key, default=None, *, positive=False, allow_inf=False):
        raw = self._raw(key, default)
        if raw is None or not isinstance(raw, str):
            return raw
        try:
            value = float(raw)
        except ValueError:
            raise io.ConfigError(f"{self.name}.{key}", f"not a number: {raw!r}") from None
        if math.isnan(value) or (math.isinf(value) and not allow_inf):
            raise io.ConfigError(f"{self.name}.{key}", f"must be finite, got {raw!r}")
        if positive and not value > 0:
            raise io.ConfigError(f"{self.name}.{key}", f"must be positive, got {raw!r}")
        return value

    def int(self, key, default=None, *, minimum=None):
        raw = self._raw(key, default)
        if raw is None or not isinstance(raw, str):
            value = raw
        else:
            try:
                value = int(raw)
            except ValueError:
                raise io.ConfigError(f"{self.name}.{key}", f"not an integer: {raw!r}") from None
        if value is not None and minimum is not None and value < minimum:
            raise io.ConfigError(f"{self.name}.{key}", f"must be >= {minimum}, got {value}")
        return value

    def str(self, key, default=None, choices=None):
        value = self._raw(key, default)
        if choices is not None and value not in choices:
            raise io.ConfigError(f"{self.name}.{key}", f"must be one of {'|'.join(choices)}, got {value!r}")
        return value

    def bool(self, key, default=False):
        raw = self._raw(key, None)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise io.ConfigError(f"{self.name}.{key}", f"not a boolean: {raw!r}")

    def float_list(self, key, default=None, *, sorted_required=True):
        if default is None:
            default = _REQUIRED
        raw = self._raw(key, default)
        if raw is None or not isinstance(raw, str):
            return raw
        tokens = [tok for tok in raw.replace(",", " ").split() if tok]
        if not tokens:
            raise io.ConfigError(f"{self.name}.{key}", "list is empty")
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            raise io.ConfigError(f"{self.name}.{key}", f"not a list of numbers: {raw!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise io.ConfigError(f"{self.name}.{key}", "values must be finite")
        if sorted_required and any(b <= a for a, b in zip(values, values[1:])):
            raise io.ConfigError(f"{self.name}.{key}", "values must be sorted ascending without duplicates")
        return values

    def path_list(self, key):
        raw = self._raw(key, _REQUIRED)
        paths = []
        for tok in raw.replace(",", " ").split():
            p = Path(tok)
            if not p.is_absolute():
                p = self.base / p
            if not p.is_file():
                raise io.ConfigError(f"{self.name}.{key}", f"input file not found: {p}")
            paths.append(p)
        if not paths:
            raise io.ConfigError(f"{self.name}.{key}", "list is empty")
        return paths


_REQUIRED = object()


class _Config:
    def __init__(self, path: Path):
        self.path = path
        self.parser = io.read_config(path)
        self.base = path.resolve().parent
        self.sections: dict[str, _Section] = {}

    def __getitem__(self, name: str) -> _Section:
        if name not in self.sections:
            self.sections[name] = _Section(self.parser, name, self.base)
        return self.sections[name]

    def echo(self) -> dict:
        return {name: dict(sec.used) for name, sec in self.sections.items() if sec.used}

    def units(self) -> str:
        return self["run"].str("units", "dimensionless", choices=("dimensionless", "physical"))


def _crystal(cfg: _Config):
    sec = cfg["crystal"]
    try:
        spec = CrystalSpec(
            L=sec.float("L", _REQUIRED),
            theta=sec.float("theta", _REQUIRED),
            n_o=sec.float("n_o", _REQUIRED),
            n_e=sec.float("n_e", _REQUIRED),
            k_p=sec.float("k_p", _REQUIRED),
        )
    except ValueError as exc:
        if isinstance(exc, io.ConfigError):
            raise
        field = str(exc).split(".")[1].split(" ")[0] if "CrystalSpec." in str(exc) else "?"
        raise io.ConfigError(f"crystal.{field}", " ".join(str(exc).split())) from None
    return spec, derive_walkoff_params(spec)


def _state_value(cfg: _Config, key: str, derived: dict | None):
    """Take ``key`` from [state], or from the crystal-derived values in physical mode."""
    if derived is not None and key in derived and key not in cfg["state"].data:
        return derived[key]
    return cfg["state"].float(key, _REQUIRED)


def _grid_sizes(cfg: _Config):
    sec = cfg["grid"]
    m = sec.int("M", 124, minimum=16)
    n = sec.int("N", int(math.ceil(1.5 * m)))
    if n < m:
        raise io.ConfigError("grid.N", f"must be >= M ({m}), got {n}")
    return m, n


def _planes(cfg: _Config, *, k: float):
    """Return ``(mu values, z values)`` from [propagation] ``mu`` or ``z``."""
    sec = cfg["propagation"]
    has_mu, has_z = "mu" in sec.data, "z" in sec.data
    if has_mu == has_z:
        raise io.ConfigError("propagation", "give exactly one of mu or z")
    if has_mu:
        mus = sec.float_list("mu")
        return mus, [mu * k for mu in mus]
    zs = sec.float_list("z")
    return [z / k for z in zs], zs


def _write_plane(out: Path, stem: str, g: JointIntensity, title: str, label: str = "x") -> list[Path]:
    csv_path = io.write_histogram(out / f"{stem}.csv", g)
    png_path = plotting.plot_joint_intensity(g, out / f"{stem}.png", title=title, label=label)
    return [csv_path, png_path]


# --------------------------------------------------------------------------- verbs


def simulate_wigner(cfg: _Config, out: Path, threads: int):
    units = cfg.units()
    derived = None
    if units == "physical":
        _, wp = _crystal(cfg)
        derived = {"t": wp.t, "l": wp.l, "beta": wp.beta}
    params = state.MomentumStateParams(
        w_p=_state_value(cfg, "w_p", derived),
        beta=_state_value(cfg, "beta", derived),
        t=_state_value(cfg, "t", derived),
        l=_state_value(cfg, "l", derived),
    )
    m, n = _grid_sizes(cfg)
    sec = cfg["grid"]
    support_tol = sec.float("support_tol", 1e-4, positive=True)
    order = sec.int("order", 1)
    if order not in (1, 3):
        raise io.ConfigError("grid.order", f"must be 1 or 3, got {order}")
    window_raw = sec.str("window", "auto")
    k = cfg["propagation"].float("k", 1.0, positive=True)
    mus, zs = _planes(cfg, k=k)

    if window_raw == "auto":
        # the search starts from one cell of a grid spanning window_guess and rounds to that cell
        guess = sec.float("window_guess", 1.0, positive=True)
        probe = state.build_momentum_wavefunction(params, Axis.symmetric(guess, m))
        try:
            window = wigner.auto_window(probe, m, tol=support_tol)
        except wigner.WindowTooSmallError as exc:
            raise io.ConfigError("grid.window", " ".join(str(exc).split())) from None
    else:
        window = sec.float("window", positive=True)
    p_outer = Axis.symmetric(window, n)
    st = state.build_momentum_wavefunction(params, Axis.symmetric(window, m))

    files, warnings = [], []
    try:
        margs = wigner.sheared_position_marginals(st, p_outer, window, mus, m=m, order=order,
                                                  support_tol=support_tol, threads=threads)
    except wigner.WindowTooSmallError as exc:
        raise io.ConfigError("grid.window", " ".join(str(exc).split())) from None
    for idx, (mu, z, g) in enumerate(zip(mus, zs, margs)):
        g = g.with_meta(z=z, mu=mu)
        if g.meta.get("integrity_warning"):
            warnings.append(f"plane {idx} (mu={mu!r}): clipped fraction {g.meta['clipped_fraction']:.4f}")
        files += _write_plane(out, f"joint_intensity_{idx:02d}", g, f"mu = {mu:g}")
    extra = {"window": window, "support_ratio": margs[0].meta["support_ratio"],
             "imag_residue": margs[0].meta["imag_residue"]}
    return files, warnings, extra, False


def simulate_ansatz(cfg: _Config, out: Path, threads: int):
    units = cfg.units()
    sec = cfg["state"]
    k = cfg["propagation"].float("k", 1.0, positive=True)
    w_phi = sec.float("w_phi", _REQUIRED, positive=True)
    rho_raw = sec.str("rho", _REQUIRED)
    if rho_raw == "auto":
        if units != "physical":
            raise io.ConfigError("state.rho", "rho = auto needs units = physical and a [crystal] section")
        spec, wp = _crystal(cfg)
        rho = state.estimate_rho(k, w_phi, spec.L, abs(wp.t))
    else:
        rho = sec.float("rho", positive=True, allow_inf=True)
    try:
        params = state.AnsatzParams(w_phi=w_phi, xi=sec.float("xi", _REQUIRED), rho=rho,
                                    x0=sec.float("x0", _REQUIRED), w_p=sec.float("w_p", _REQUIRED, positive=True))
    except ValueError as exc:
        raise io.ConfigError("state", " ".join(str(exc).split())) from None
    grid = cfg["grid"]
    m = grid.int("M", 128, minimum=16)
    half = grid.float("half_width", _REQUIRED, positive=True)
    boundary_tol = grid.float("boundary_tol", 1e-4, positive=True)
    mus, zs = _planes(cfg, k=k)
    st = state.build_ansatz_wavefunction(params, Axis.symmetric(half, m))
    if st.grid.boundary_ratio() > boundary_tol:
        raise io.ConfigError("grid.half_width",
                             f"field on the window edge is {st.grid.boundary_ratio():.3g} of its peak "
                             f"(boundary_tol {boundary_tol:g})")

    def plane(z):
        psi = spectrum.propagate_angular_spectrum(st, spectrum.PropagationSetting(z, k), boundary_tol=boundary_tol)
        return spectrum.joint_intensity(psi, z=z)

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        planes = list(pool.map(plane, zs))
    files = []
    for idx, (z, mu, g) in enumerate(zip(zs, mus, planes)):
        files += _write_plane(out, f"joint_intensity_{idx:02d}", g.with_meta(mu=mu), f"z = {z:g}")
    warnings, failed = [], False
    if cfg["analysis"].bool("width_map", False):
        rows, w_files, failed = _width_outputs(cfg, planes, out, threads, units)
        files += w_files
    return files, warnings, {"rho": rho}, failed


def heuristic_map(cfg: _Config, out: Path, threads: int):
    units = cfg.units()
    derived = None
    if units == "physical":
        _, wp = _crystal(cfg)
        derived = {"t": wp.t, "l": wp.l, "beta": wp.beta}
    sec = cfg["state"]
    try:
        params = heuristic.HeuristicParams(
            w_phi=sec.float("w_phi", _REQUIRED), beta=_state_value(cfg, "beta", derived),
            t=_state_value(cfg, "t", derived), l=_state_value(cfg, "l", derived),
            k=sec.float("k", _REQUIRED), w_p=sec.float("w_p", _REQUIRED),
        )
    except ValueError as exc:
        if isinstance(exc, io.ConfigError):
            raise
        raise io.ConfigError("state", " ".join(str(exc).split())) from None
    grid = cfg["map"]
    zs = grid.float_list("z")
    xs = grid.float_list("x_plus")
    width = np.full((len(zs), len(xs)), np.nan)
    asym = np.full_like(width, np.nan)
    failed = []
    for i, z in enumerate(zs):
        try:
            width[i] = heuristic.anti_correlation_width(z, np.asarray(xs), params)
            asym[i] = heuristic.asymmetry_map([z], xs, params)[0]
        except heuristic.OutOfValidityError as exc:
            failed.append(f"z={z!r}: {exc}")
    files = [
        _write_table(out / "anti_correlation_width.csv", zs, xs, width, "anti-correlation width"),
        _write_table(out / "asymmetry_map.csv", zs, xs, asym, "normalized width difference (t vs t=0)"),
        plotting.plot_map(width, zs, xs, out / "anti_correlation_width.png", xlabel="z", ylabel="x_+",
                          title="anti-correlation width"),
        plotting.plot_map(asym, zs, xs, out / "asymmetry_map.png", xlabel="z", ylabel="x_+",
                          title="asymmetry", diverging=True),
    ]
    return files, failed, {"z_eff": params.z_eff}, bool(failed)


def _write_table(path: Path, zs, xs, values, what: str) -> Path:
    lines = [f"# {what}; rows: z, columns: x_plus", "z," + ",".join(repr(float(x)) for x in xs)]
    for z, row in zip(zs, values):
        lines.append(repr(float(z)) + "," + ",".join(repr(float(v)) for v in row))
    return io.atomic_write_text(path, "\n".join(lines) + "\n")


def _read_inputs(cfg: _Config):
    sec = cfg["input"]
    paths = sec.path_list("files")
    magnify = sec.bool("apply_magnification", False)
    series = []
    for p in paths:
        try:
            series.append(io.read_histogram(p, apply_magnification=magnify))
        except io.HistogramParseError as exc:
            raise io.ConfigError("input.files", " ".join(str(exc).split())) from None
    return series


def _width_outputs(cfg: _Config, series, out: Path, threads: int, units: str):
    sec = cfg["sections"]
    kind = sec.str("kind", "fixed_sum", choices=("fixed_sum", "fixed_difference"))
    kind = analysis.CutKind.FIXED_SUM if kind == "fixed_sum" else analysis.CutKind.FIXED_DIFFERENCE
    default_step = analysis.DEFAULT_C_STEP if units == "physical" else 1.0
    c_step = sec.float("c_step", default_step, positive=True)
    c_values = sec.float_list("c") if "c" in sec.data else None
    step = sec.float("step", None, positive=True)
    rows = analysis.width_map(series, c_values, c_step=c_step, kind=kind, step=step,
                              poisson=sec.bool("poisson", False), threads=threads)
    unit_text = ("z [m], c [m], A [1/m^2], B [1], width [m], amplitude [counts], residual_rms [counts]"
                 if units == "physical" else "dimensionless")
    table = io.atomic_write_text(out / "widths.csv", analysis.format_width_table(rows, unit_text))
    figure = plotting.plot_width_rows(rows, out / "widths.png", title="fitted section widths")
    planes_ok = {}
    for row in rows:
        planes_ok[row.z] = planes_ok.get(row.z, False) or row.ok
    failed = not rows or not all(planes_ok.values())
    return rows, [table, figure], failed


def fit_sections(cfg: _Config, out: Path, threads: int):
    units = cfg.units()
    series = _read_inputs(cfg)
    rows, files, failed = _width_outputs(cfg, series, out, threads, units)
    bad = sum(not r.ok for r in rows)
    warnings = [f"{bad} of {len(rows)} cells failed to fit"] if bad else []
    return files, warnings, {"cells": len(rows), "failed_cells": bad}, failed


def postselect(cfg: _Config, out: Path, threads: int):
    series = _read_inputs(cfg)
    sec = cfg["postselect"]
    cs = sec.float_list("c")
    step = sec.float("step", None, positive=True)
    lines = ["plane,c,coordinate,value"]
    failures, profiles = [], []
    for j, g in enumerate(series):
        for c in cs:
            try:
                prof = analysis.postselect_profile(g, c, step)
            except analysis.EmptyCutError as exc:
                failures.append(f"plane {j} c={c!r}: {exc}")
                continue
            profiles.append((j, c, prof))
            lines.extend(f"{j},{c!r},{float(s)!r},{float(v)!r}" for s, v in zip(prof.coordinate, prof.values))
    files = [io.atomic_write_text(out / "postselect.csv", "\n".join(lines) + "\n")]
    if profiles:
        files.append(_plot_profiles(profiles, out / "postselect.png"))
    spread = _max_profile_spread(profiles)
    return files, failures, {"max_sup_difference": spread}, bool(failures)


def _max_profile_spread(profiles) -> float:
    """Largest relative sup-norm difference between normalized profiles of one plane."""
    best = 0.0
    for plane in sorted({p[0] for p in profiles}):
        sel = [p[2] for p in profiles if p[0] == plane]
        for i, a in enumerate(sel):
            for b in sel[i + 1:]:
                best = max(best, analysis.profile_sup_difference(a, b))
    return best


def _plot_profiles(profiles, path):
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    for j, c, prof in profiles:
        ax.plot(prof.coordinate, prof.values, label=f"plane {j}, c={c:g}")
    ax.set_xlabel("x_+ (along cut)")
    ax.set_ylabel("normalized counts")
    ax.legend(fontsize="x-small")
    fig.tight_layout()
    return plotting._save(fig, path)


_HANDLERS = {
    "simulate-wigner": simulate_wigner,
    "simulate-ansatz": simulate_ansatz,
    "heuristic-map": heuristic_map,
    "fit-sections": fit_sections,
    "postselect": postselect,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="walkoff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, type=Path, help="INI run configuration")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def run(verb: str, config_path: Path, out: Path, threads: int = 1) -> int:
    """Execute one verb; returns the process exit code."""
    try:
        if threads < 1:
            raise io.ConfigError("--threads", f"must be >= 1, got {threads}")
        cfg = _Config(Path(config_path))
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        files, warnings, extra, partial = _HANDLERS[verb](cfg, out, threads)
        units = cfg.units()
    except io.ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    for w in warnings:
        log.warning(w)
    config = cfg.echo()
    config["derived"] = {k: (repr(v) if isinstance(v, float) else v) for k, v in extra.items()}
    io.write_manifest(out, verb=verb, config=config, files=files, units=units, warnings=warnings)
    if partial:
        print(f"partial-failure verb={verb} details={len(warnings)}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args.verb, args.config, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
