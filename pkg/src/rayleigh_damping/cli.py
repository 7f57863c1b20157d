"""Command-line front end.

    rayleigh-damping {spectrum,evolve,depletion,decayfit} --config run.cfg --out DIR [--threads N]

The config is flat ``key = value`` text with dotted sections; ``#`` starts a
comment.  Exit codes: 0 success, 1 configuration error, 2 assumption audit
failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .depletion import QUANTITIES, compute_omega_inf, fit_decay
from .errors import (A3ViolationError, ConfigError, ContourEigenvalueError, RayleighError,
                     ValidationError)
from .evolution import THREADS_ENV, InitialData, evolve_contour, evolve_direct, split_modes
from .profile import _DEFAULT_PARAMS, KINDS, ProfileSpec, build_profile
from .spectrum import IM_FLOOR, SCAN_POINTS, TOL_EMBED, spectrum_report

EXIT_OK, EXIT_CONFIG, EXIT_AUDIT, EXIT_NUMERIC = 0, 1, 2, 3

_PARAM_NAMES = sorted({k for d in _DEFAULT_PARAMS.values() for k in d})


def _floats(v):
    return [float(x) for x in v.split(",") if x.strip()]


# key -> (parser, default); None default means "no default"
SCHEMA = {
    "profile.kind": (str, None),
    "profile.table": (str, None),
    **{f"profile.{p}": (float, None) for p in _PARAM_NAMES},
    "alpha": (float, None),
    "numerics.y_max": (float, 30.0),
    "numerics.im_floor": (float, IM_FLOOR),
    "numerics.tol_embed": (float, TOL_EMBED),
    "numerics.n_scan": (int, SCAN_POINTS),
    "spectrum.box": (_floats, None),
    "data.kind": (str, "gaussian"),
    "data.center": (float, 1.0),
    "data.width": (float, 0.3),
    "data.amplitude": (float, 1.0),
    "data.table": (str, None),
    "data.n": (int, 6001),
    "output.y_max": (float, 10.0),
    "output.n": (int, 201),
    "evolve.method": (str, "contour"),
    "evolve.times": (_floats, None),
    "evolve.dt": (float, 0.02),
    "evolve.h": (float, 0.005),
    "evolve.eps": (float, None),
    "depletion.window": (float, 1e-3),
    "decayfit.quantity": (str, "psi"),
    "decayfit.window": (_floats, [20.0, 200.0]),
    "decayfit.n_times": (int, 8),
    "decayfit.method": (str, "contour"),
}

_POSITIVE = ("numerics.y_max", "numerics.im_floor", "numerics.tol_embed", "numerics.n_scan",
             "data.width", "data.n", "output.y_max", "output.n", "evolve.dt", "evolve.h",
             "evolve.eps", "depletion.window", "decayfit.n_times")


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key):
        return self.values.get(key)


def parse_config(text: str) -> RunConfig:
    raw = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in SCHEMA:
            raise ConfigError(f"line {n}: unknown key {k!r}")
        if k in raw:
            raise ConfigError(f"line {n}: duplicate key {k!r}")
        try:
            raw[k] = SCHEMA[k][0](v)
        except ValueError as exc:
            raise ConfigError(f"line {n}: bad value for {k!r}: {exc}") from None
    vals = {k: d for k, (_, d) in SCHEMA.items()}
    vals.update(raw)
    for k in ("profile.kind", "alpha"):
        if vals[k] is None:
            raise ConfigError(f"missing required key {k!r}")
    if vals["profile.kind"] not in KINDS:
        raise ConfigError(f"profile.kind must be one of {sorted(KINDS)}")
    for k in _POSITIVE:
        if vals[k] is not None and not vals[k] > 0:
            raise ConfigError(f"{k} must be positive")
    if not vals["alpha"] >= 0:
        raise ConfigError("alpha must be non-negative")
    if vals["spectrum.box"] is not None and len(vals["spectrum.box"]) != 4:
        raise ConfigError("spectrum.box needs four numbers: re_lo, re_hi, im_lo, im_hi")
    if vals["evolve.method"] not in ("contour", "direct", "both"):
        raise ConfigError("evolve.method must be contour, direct or both")
    if vals["decayfit.method"] not in ("contour", "direct"):
        raise ConfigError("decayfit.method must be contour or direct")
    if vals["decayfit.quantity"] not in QUANTITIES:
        raise ConfigError(f"decayfit.quantity must be one of {QUANTITIES}")
    if len(vals["decayfit.window"]) != 2 or not 0 < vals["decayfit.window"][0] < vals["decayfit.window"][1]:
        raise ConfigError("decayfit.window needs two increasing positive times")
    if vals["decayfit.n_times"] < 8:
        raise ConfigError("decayfit.n_times must be at least 8")
    if vals["data.kind"] not in ("gaussian", "table", "zero"):
        raise ConfigError("data.kind must be gaussian, table or zero")
    return RunConfig(vals)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None


# ----------------------------------------------------------------------------


def _profile(cfg):
    kind = cfg["profile.kind"]
    params = {p: cfg[f"profile.{p}"] for p in _PARAM_NAMES if cfg.get(f"profile.{p}") is not None}
    unknown = set(params) - set(_DEFAULT_PARAMS.get(kind, {}))
    if unknown:
        raise ConfigError(f"parameters {sorted(unknown)} do not apply to {kind}")
    if kind == "tabulated" and not cfg.get("profile.table"):
        raise ConfigError("profile.table is required for tabulated profiles")
    return build_profile(ProfileSpec(kind, params, cfg.get("profile.table")), cfg["numerics.y_max"])


def _data(cfg, profile):
    a = cfg["alpha"]
    if not a > 0:
        raise ConfigError("alpha must be positive for evolution and depletion")
    y_max = profile.y_max
    kind = cfg["data.kind"]
    if kind == "gaussian":
        return InitialData.gaussian(a, cfg["data.center"], cfg["data.width"], y_max=y_max,
                                    n=cfg["data.n"], amplitude=cfg["data.amplitude"])
    if kind == "zero":
        y = np.linspace(0.0, y_max, cfg["data.n"])
        return InitialData(a, y, np.zeros_like(y))
    if not cfg.get("data.table"):
        raise ConfigError("data.table is required when data.kind = table")
    try:
        tab = np.loadtxt(cfg["data.table"], delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read data.table: {exc}") from None
    if tab.shape[1] != 3:
        raise ConfigError("data.table needs columns y, re_omega0, im_omega0")
    return InitialData(a, tab[:, 0], tab[:, 1] + 1j * tab[:, 2])


def _ygrid(cfg, profile):
    return np.linspace(0.0, min(cfg["output.y_max"], profile.y_max), cfg["output.n"])


def _report(cfg, profile):
    return spectrum_report(profile, cfg["alpha"], box=cfg.get("spectrum.box"),
                           im_floor=cfg["numerics.im_floor"], n_scan=cfg["numerics.n_scan"],
                           tol_embed=cfg["numerics.tol_embed"])


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_spectrum(cfg, out, threads) -> int:
    profile = _profile(cfg)
    rep = _report(cfg, profile)
    rep.to_json(os.path.join(out, "spectrum.json"))
    return EXIT_OK if rep.flags_ok else EXIT_AUDIT


def _evolve(cfg, profile, data, times, method, threads, report):
    y = _ygrid(cfg, profile)
    if method == "contour":
        return evolve_contour(profile, data, times, report=report, y=y, threads=threads,
                              eps=cfg.get("evolve.eps"))
    f = evolve_direct(profile, data, times, cfg["evolve.dt"], y=y, h=cfg["evolve.h"])
    return split_modes(f, report, profile, data)


def _rel(a, b):
    den = np.max(np.abs(b), axis=1)
    den = np.where(den > 0, den, 1.0)
    return float(np.max(np.max(np.abs(a - b), axis=1) / den))


def cmd_evolve(cfg, out, threads) -> int:
    times = cfg.get("evolve.times")
    if not times:
        raise ConfigError("evolve.times must list at least one time")
    times = np.array(sorted(times))
    if times[0] < 0:
        raise ConfigError("evolve.times must be non-negative")
    profile = _profile(cfg)
    data = _data(cfg, profile)
    report = _report(cfg, profile)
    method = cfg["evolve.method"]
    fields = {}
    for m in (("contour", "direct") if method == "both" else (method,)):
        fields[m] = _evolve(cfg, profile, data, times, m, threads, report)
        fields[m].to_csv(os.path.join(out, f"field_{m}.csv"))
    if method == "both":
        c, d = fields["contour"], fields["direct"]
        _write_json(os.path.join(out, "comparison.json"), {
            "version": __version__, "times": times.tolist(),
            "max_rel_diff_psi": _rel(c.psi, d.psi), "max_rel_diff_dpsi": _rel(c.dpsi, d.dpsi),
            "max_rel_diff_omega": _rel(c.omega, d.omega)})
    return EXIT_OK


def cmd_depletion(cfg, out, threads) -> int:
    profile = _profile(cfg)
    data = _data(cfg, profile)
    y = np.union1d(_ygrid(cfg, profile), [e.y_extr for e in profile.extremal_layers])
    dp = compute_omega_inf(profile, data, y, window=cfg["depletion.window"], threads=threads)
    dp.to_csv(os.path.join(out, "depletion.csv"))
    d = dp.to_dict()
    d["diagnostics"] = [{"y_extr": e["y_extr"], "fit_exponent": e["exponent"],
                         "fit_exponent_zeta_b": e["exponent_zeta_b"],
                         "abs_omega_inf_at_extr": e["abs_omega_inf_at_extr"],
                         "relative_to_max": e["relative_to_max"]} for e in dp.extremal]
    del d["extremal"]
    _write_json(os.path.join(out, "depletion.json"), d)
    return EXIT_OK


def cmd_decayfit(cfg, out, threads) -> int:
    profile = _profile(cfg)
    data = _data(cfg, profile)
    t0, t1 = cfg["decayfit.window"]
    times = np.geomspace(t0, t1, cfg["decayfit.n_times"])
    report = _report(cfg, profile)
    field = _evolve(cfg, profile, data, times, cfg["decayfit.method"], threads, report)
    q = cfg["decayfit.quantity"]
    om = None
    if q == "omega_remainder":
        om = compute_omega_inf(profile, data, field.y, window=cfg["depletion.window"],
                               threads=threads).omega_inf
    fit = fit_decay(field, q, (t0, t1), profile=profile, omega_inf=om)
    _write_json(os.path.join(out, "decayfit.json"), fit.to_dict())
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "evolve": cmd_evolve, "depletion": cmd_depletion,
            "decayfit": cmd_decayfit}


def resolve_threads(requested: int | None) -> int:
    """--threads value capped by the environment variable when it is set."""
    cap = os.environ.get(THREADS_ENV)
    try:
        cap = int(cap) if cap else None
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    n = requested if requested is not None else (cap or 1)
    if cap is not None:
        n = min(n, cap)
    if n < 1:
        raise ConfigError("thread count must be at least 1")
    return n


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="rayleigh-damping",
                                 description="Rayleigh equation spectra, evolution and depletion")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=".")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--version", action="version", version=__version__)
    args = ap.parse_args(argv)
    try:
        threads = resolve_threads(args.threads)
        cfg = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, threads)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except A3ViolationError as exc:
        print(f"assumption audit failed: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except ContourEigenvalueError as exc:
        print(f"contour error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RayleighError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
