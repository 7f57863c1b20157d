"""Limiting vorticity, depletion at extremal layers and decay-rate fits.

With the transport convention of the evolution module,

    omega(t, y) e^{i alpha U t}  ->  omega_inf(y) = omega0(y) - i alpha U''(y) psi_{U(y)+i0}(y),

where psi_c is the resolvent with forcing i omega0 / alpha.  Splitting psi_c into
interior and boundary parts gives omega_inf = -(zeta_int + zeta_b) with

    zeta_int(y) = i alpha U'' psi^int_{U(y)}(y) - omega0(y),   zeta_b(y) = i alpha U'' psi^b_{U(y)}(y).

At an extremal height the real point c = U(y) is a double critical layer and
the solver is not applicable; there the value is taken from a least-squares
fit a + b s + d s^2 + e s^2 log|s| (s = y - y_extr) to samples on a collar
just outside a small window.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import A3ViolationError, ExtremalWindowError, PoorFitError
from .evolution import EvolutionField, InitialData, default_threads
from .greens import apply_greens_at
from .profile import ShearProfile
from .rayleigh_solver import TOL_EXTR
from .spectrum import A3_FLOOR, dispersion_scale

WINDOW = 1e-3
COLLAR = (1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
FIT_BAND = (1e-2, 1e-1)
R2_MIN = 0.95


def theta(x):
    """Weight 1 + 1_{|x|<=1} |log|x||."""
    x = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        return 1.0 + np.where(x <= 1.0, np.abs(np.log(np.maximum(x, 1e-300))), 0.0)


@dataclass(frozen=True, eq=False)
class _Sample:
    psi: complex
    psi_b: complex
    D: complex


def _resolvent_on_diagonal(profile, data, ys, threads):
    """psi_{U(y)+i0}(y) and its boundary part for each y (nodes off extremal windows)."""
    F = data.forcing()
    a = data.alpha

    def one(y):
        if F.zero or y == 0.0:
            return _Sample(0j, 0j, complex("nan"))
        c = complex(float(profile.us(np.array([y]))[0]))
        r = apply_greens_at(profile, a, c, F, np.array([y]), tol_eig=None)
        return _Sample(complex(r.psi[0]), complex(r.psi_b[0]), r.sweep.D)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, ys))
    return [one(y) for y in ys]


def _check_window(profile, e, window):
    scale = profile.scale()
    dc = 0.5 * abs(e.us2_at_extr) * (COLLAR[0] * window) ** 2
    if dc < 10.0 * TOL_EXTR * scale:
        raise ExtremalWindowError(
            f"window {window:g} around y_extr={e.y_extr:g} is narrower than the singular band "
            f"(|U-c_extr| = {dc:.3g} on the collar)")
    others = [abs(o.y_extr - e.y_extr) for o in profile.extremal_layers if o is not e]
    room = min(others + [e.y_extr])
    if COLLAR[-1] * window > 0.5 * room:
        raise ExtremalWindowError(f"window {window:g} too wide near y_extr={e.y_extr:g}")


def _collar_fit(s, vals, s0):
    """Value at s0 of the local model a + b s + d s^2 + e s^2 log|s|."""
    def basis(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.ones_like(x), x, x * x, x * x * np.log(np.abs(x) + 1e-300)], axis=-1)
    coef, *_ = np.linalg.lstsq(basis(s), vals, rcond=None)
    return basis(np.atleast_1d(s0)) @ coef


def _local_exponent(profile, data, e, omega_fn, band=FIT_BAND, n=12):
    s = np.geomspace(band[0], band[1], n)
    ys = np.concatenate([e.y_extr - s[::-1], e.y_extr + s])
    ys = ys[ys > 0]
    vals = np.abs(omega_fn(ys))
    x = np.log(np.abs(ys - e.y_extr))
    ok = vals > 0
    if ok.sum() < 4:
        return float("nan")
    return float(np.polyfit(x[ok], np.log(vals[ok]), 1)[0])


@dataclass(frozen=True, eq=False)
class DepletionProfile:
    alpha: float
    y: np.ndarray
    omega_inf: np.ndarray
    zeta_int: np.ndarray
    zeta_b: np.ndarray
    extremal: list = field(default_factory=list)   # per layer diagnostics (dicts)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# version={__version__}\n")
            fh.write(f"# alpha={self.alpha!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y", "re_omega_inf", "im_omega_inf", "re_zeta_int", "im_zeta_int",
                        "re_zeta_b", "im_zeta_b"])
            for j, y in enumerate(self.y):
                o, zi, zb = self.omega_inf[j], self.zeta_int[j], self.zeta_b[j]
                w.writerow([repr(float(y)), repr(o.real), repr(o.imag), repr(zi.real),
                            repr(zi.imag), repr(zb.real), repr(zb.imag)])

    def to_dict(self) -> dict:
        return {"version": __version__, "alpha": self.alpha,
                "max_abs_omega_inf": float(np.max(np.abs(self.omega_inf))),
                "extremal": self.extremal}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _evaluate(profile, data, ys, window, threads):
    """omega_inf, zeta_int, zeta_b and D(U(y)) at arbitrary heights."""
    ys = np.asarray(ys, dtype=float)
    a = data.alpha
    u, _, u2 = profile.derivs(ys)
    w0 = data.omega_at(ys)
    layers = profile.extremal_layers
    inside = np.zeros(ys.size, dtype=bool)
    for e in layers:
        inside |= np.abs(ys - e.y_extr) < window
    psi = np.zeros(ys.size, dtype=complex)
    psib = np.zeros(ys.size, dtype=complex)
    D = np.full(ys.size, complex("nan"))
    out = np.nonzero(~inside)[0]
    for j, smp in zip(out, _resolvent_on_diagonal(profile, data, ys[out], threads)):
        psi[j], psib[j], D[j] = smp.psi, smp.psi_b, smp.D
    for e in layers:
        idx = np.nonzero(np.abs(ys - e.y_extr) < window)[0]
        if idx.size == 0:
            continue
        _check_window(profile, e, window)
        s = np.concatenate([-np.array(COLLAR)[::-1], np.array(COLLAR)]) * window
        col = e.y_extr + s
        cs = _resolvent_on_diagonal(profile, data, col, threads)
        cu2 = profile.us2(col)
        c0 = data.omega_at(col)
        om_c = c0 - 1j * a * cu2 * np.array([q.psi for q in cs])
        zb_c = 1j * a * cu2 * np.array([q.psi_b for q in cs])
        sj = ys[idx] - e.y_extr
        om_in = _collar_fit(s, om_c, sj)
        zb_in = _collar_fit(s, zb_c, sj)
        # store as equivalent resolvent values so the assembly below is uniform
        with np.errstate(divide="ignore", invalid="ignore"):
            psi[idx] = (w0[idx] - om_in) / (1j * a * u2[idx])
            psib[idx] = zb_in / (1j * a * u2[idx])
        D[idx] = np.array([q.D for q in cs]).mean()
    omega_inf = w0 - 1j * a * u2 * psi
    zeta_b = 1j * a * u2 * psib
    zeta_int = -omega_inf - zeta_b
    return omega_inf, zeta_int, zeta_b, D


def compute_omega_inf(profile: ShearProfile, data: InitialData, y=None, *,
                      window: float = WINDOW, threads: int | None = None) -> DepletionProfile:
    """Limiting vorticity profile on y, with per-extremal-layer depletion diagnostics."""
    threads = default_threads() if threads is None else max(1, int(threads))
    if y is None:
        y = np.linspace(0.0, min(profile.y_max, 10.0), 401)
        y = np.union1d(y, [e.y_extr for e in profile.extremal_layers])
    y = np.asarray(y, dtype=float)
    om, zi, zb, _ = _evaluate(profile, data, y, window, threads)
    diags = []
    big = float(np.max(np.abs(om))) if om.size else 0.0
    for e in profile.extremal_layers:
        at = _evaluate(profile, data, np.array([e.y_extr]), window, threads)
        fn_o = lambda ys: _evaluate(profile, data, ys, window, threads)[0]
        fn_b = lambda ys: _evaluate(profile, data, ys, window, threads)[2]
        diags.append({
            "y_extr": e.y_extr,
            "c_extr": e.c_extr,
            "abs_omega_inf_at_extr": float(abs(at[0][0])),
            "relative_to_max": float(abs(at[0][0]) / big) if big > 0 else 0.0,
            "exponent": _local_exponent(profile, data, e, fn_o),
            "exponent_zeta_b": _local_exponent(profile, data, e, fn_b),
        })
    return DepletionProfile(data.alpha, y, om, zi, zb, diags)


def depletion_boundary_part(profile: ShearProfile, data: InitialData, y=None, *,
                            window: float = WINDOW, a3_floor: float = A3_FLOOR,
                            threads: int | None = None):
    """zeta_b(y) = i alpha U'' psi^b_{U(y)}(y) and its local exponent at each extremal layer."""
    threads = default_threads() if threads is None else max(1, int(threads))
    if y is None:
        y = np.linspace(0.0, min(profile.y_max, 10.0), 401)
    y = np.asarray(y, dtype=float)
    _, _, zb, D = _evaluate(profile, data, y, window, threads)
    scale = dispersion_scale(profile, data.alpha)
    exps = []
    for e in profile.extremal_layers:
        near = np.abs(y - e.y_extr) < FIT_BAND[1]
        s = np.geomspace(window * COLLAR[0], FIT_BAND[1], 16)
        probe = np.concatenate([e.y_extr - s, e.y_extr + s])
        probe = probe[probe > 0]
        _, _, zbp, Dp = _evaluate(profile, data, probe, window, threads)
        dmin = np.nanmin(np.abs(np.concatenate([Dp, D[near]])))
        if dmin < a3_floor * scale:
            raise A3ViolationError(
                f"|D| = {dmin:.3g} below {a3_floor:g} x scale near c_extr={e.c_extr:g}")
        fn = lambda ys: _evaluate(profile, data, ys, window, threads)[2]
        exps.append({"y_extr": e.y_extr, "exponent": _local_exponent(profile, data, e, fn)})
    return zb, exps


# ----------------------------------------------------------------------------
# long-time extraction and decay fits


def extract_omega_inf(field: EvolutionField, profile: ShearProfile, window):
    """Average of omega(t, y) e^{i alpha U t} over the output times inside window."""
    t0, t1 = window
    sel = (field.times >= t0) & (field.times <= t1)
    if not np.any(sel):
        raise ValueError("no output times inside the averaging window")
    u = profile.us(field.y)
    ph = np.exp(1j * field.alpha * np.outer(field.times[sel], u))
    return np.mean(field.omega[sel] * ph, axis=0)


def remainder_norms(field: EvolutionField, profile: ShearProfile, omega_inf):
    """sup_y |omega e^{i alpha U t} - omega_inf| / Theta(y - y_extr) per output time."""
    u = profile.us(field.y)
    w = _theta_weight(profile, field.y)
    rem = field.omega * np.exp(1j * field.alpha * np.outer(field.times, u)) - omega_inf[None, :]
    return np.max(np.abs(rem) / w[None, :], axis=1)


def _theta_weight(profile, y):
    w = np.ones_like(np.asarray(y, dtype=float))
    for e in profile.extremal_layers:
        w = np.maximum(w, theta(y - e.y_extr))
    return w


QUANTITIES = ("psi", "dpsi", "psi_int", "omega_remainder")


@dataclass(frozen=True)
class DecayFit:
    window: tuple
    quantity: str
    exponent: float
    r2: float
    amplitude: float
    n: int

    def to_dict(self) -> dict:
        return {"version": __version__, "window": list(self.window), "quantity": self.quantity,
                "exponent": self.exponent, "r2": self.r2, "amplitude": self.amplitude,
                "n": self.n}


def fit_decay(field: EvolutionField, quantity: str, window, *, profile: ShearProfile | None = None,
              omega_inf=None, min_samples: int = 8, r2_min: float = R2_MIN) -> DecayFit:
    """Slope of log sup_y |q| (Theta-weighted near extremal layers) against log(alpha t)."""
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    t0, t1 = (float(window[0]), float(window[1]))
    sel = (field.times >= t0) & (field.times <= t1) & (field.times > 0)
    if sel.sum() < min_samples:
        raise ValueError(f"window {window} holds {int(sel.sum())} output times; "
                         f"at least {min_samples} are required")
    w = np.ones(field.y.size) if profile is None else _theta_weight(profile, field.y)
    if quantity == "psi":
        q = field.decay_psi
    elif quantity == "dpsi":
        q = field.decay_dpsi
    elif quantity == "psi_int":
        if "psi_int" not in field.parts:
            raise ValueError("field carries no interior part (use the contour method)")
        q = field.parts["psi_int"]
    else:
        if profile is None or omega_inf is None:
            raise ValueError("omega_remainder needs the profile and omega_inf")
        u = profile.us(field.y)
        q = field.omega * np.exp(1j * field.alpha * np.outer(field.times, u)) - omega_inf[None, :]
    s = np.max(np.abs(q[sel]) / w[None, :], axis=1)
    x = np.log(field.alpha * field.times[sel])
    yv = np.log(s)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, yv, rcond=None)
    fit = A @ coef
    ss = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 - float(np.sum((yv - fit) ** 2)) / ss if ss > 0 else 1.0
    res = DecayFit((t0, t1), quantity, float(coef[0]), r2, float(math.exp(coef[1])), int(sel.sum()))
    if r2 < r2_min:
        raise PoorFitError(f"fit of {quantity} over {window} has r2={r2:.3f} < {r2_min}")
    return res
