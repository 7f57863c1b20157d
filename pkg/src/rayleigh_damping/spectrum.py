"""Dispersion relation D(alpha, c) = psi_-(0), discrete and embedded eigenvalues.

Discrete eigenvalues (Im c > 0) are counted by the argument principle over
adaptively subdivided rectangles and refined by damped Newton iteration.
Embedded eigenvalues are real zeros of the boundary trace of D inside the
velocity range; they are found by a scan for small local minima of |D|
followed by Newton refinement in the real variable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import (BoundaryZeroError, ConfigError, ExtremalVelocityError, NonSimpleError,
                     TailError)
from .profile import ShearProfile
from .rayleigh_solver import TOL_EXTR, SpectralParams, sweep

TOL_EIG = 1e-9
IM_FLOOR = 1e-3
A3_FLOOR = 1e-4
SIMPLE_FLOOR = 1e-4
FD_STEP = 1e-6
TOL_EMBED = 5e-2
SCAN_POINTS = 2000
MAX_DEPTH = 8
NEWTON_ITERS = 60
_BOUNDARY_SAFETY = 1e-6
_MAX_ARG_STEP = math.pi / 4


@dataclass(frozen=True)
class DispersionSample:
    params: SpectralParams
    value: complex
    dvalue: complex


@dataclass
class SpectrumReport:
    alpha: float
    discrete: list = field(default_factory=list)      # (c, residue_weight)
    embedded: list = field(default_factory=list)      # (c_embed, simple)
    continuous_range: tuple = (0.0, 0.0)
    a3_ok: list = field(default_factory=list)         # one flag per extremal layer
    a4_ok: bool = True
    d_scale: float = 1.0

    @property
    def flags_ok(self) -> bool:
        return all(self.a3_ok) and self.a4_ok

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "alpha": self.alpha,
            "discrete": [{"re": c.real, "im": c.imag, "residue_re": r.real, "residue_im": r.imag}
                         for c, r in self.discrete],
            "embedded": [{"c": c, "simple": bool(s)} for c, s in self.embedded],
            "range": {"lo": self.continuous_range[0], "hi": self.continuous_range[1]},
            "flags": {"a3": bool(all(self.a3_ok)), "a4": bool(self.a4_ok),
                      "a3_layers": [bool(a) for a in self.a3_ok]},
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def dispersion_value(profile: ShearProfile, alpha: float, c: complex,
                     tol_extr: float = TOL_EXTR) -> complex:
    """D(alpha, c) alone."""
    return complex(sweep(profile, alpha, c, [0.0], partner=False, tol_extr=tol_extr).u0[0])


def dispersion(profile: ShearProfile, alpha: float, c: complex, *, step: float = FD_STEP,
               tol_extr: float = TOL_EXTR) -> DispersionSample:
    """D and its c-derivative (central differences along the real direction)."""
    c = complex(c)
    d = dispersion_value(profile, alpha, c, tol_extr)
    h = step * max(1.0, abs(c))
    dd = (dispersion_value(profile, alpha, c + h, tol_extr)
          - dispersion_value(profile, alpha, c - h, tol_extr)) / (2.0 * h)
    return DispersionSample(SpectralParams(alpha, c), d, dd)


def dispersion_scale(profile: ShearProfile, alpha: float) -> float:
    """|D| at a reference point well above the velocity range; tolerances are relative to it."""
    lo, hi = profile.velocity_range()
    c = 0.5 * (lo + hi) + 1j * max(hi - lo, 1.0)
    return max(abs(dispersion_value(profile, alpha, c)), 1e-300)


class _Evaluator:
    """Memoised D on exact complex keys so shared cell edges are computed once."""

    def __init__(self, profile, alpha):
        self.profile = profile
        self.alpha = alpha
        self.cache = {}

    def __call__(self, c):
        c = complex(c)
        v = self.cache.get(c)
        if v is None:
            v = dispersion_value(self.profile, self.alpha, c)
            self.cache[c] = v
        return v


def _edge_winding(D, a, b, floor, max_refine=14):
    """Accumulated arg change of D along the segment a -> b."""
    ts = list(np.linspace(0.0, 1.0, 9))
    vals = [D(a + t * (b - a)) for t in ts]
    total = 0.0
    i = 0
    while i < len(ts) - 1:
        v0, v1 = vals[i], vals[i + 1]
        if min(abs(v0), abs(v1)) < floor:
            raise BoundaryZeroError(f"|D| < {floor:.3g} on a cell boundary near {a + ts[i] * (b - a)}")
        darg = np.angle(v1 / v0)
        if abs(darg) > _MAX_ARG_STEP and ts[i + 1] - ts[i] > 2.0 ** -max_refine / 8:
            tm = 0.5 * (ts[i] + ts[i + 1])
            ts.insert(i + 1, tm)
            vals.insert(i + 1, D(a + tm * (b - a)))
            continue
        total += darg
        i += 1
    return total


def winding_number(D, box, floor) -> int:
    """Argument-principle zero count of D inside the rectangle (x0, x1, y0, y1)."""
    x0, x1, y0, y1 = box
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    total = sum(_edge_winding(D, corners[k], corners[(k + 1) % 4], floor) for k in range(4))
    w = total / (2.0 * math.pi)
    n = int(round(w))
    if abs(w - n) > 0.1:
        raise BoundaryZeroError(f"non-integer winding {w:.3f}; D varies too fast on the boundary")
    return n


def _newton(D, c0, scale, box=None, step=FD_STEP, tol=TOL_EIG):
    """Damped Newton on D; returns (root, derivative) or None."""
    c = complex(c0)
    d = D(c)
    for _ in range(NEWTON_ITERS):
        h = step * max(1.0, abs(c))
        dd = (D(c + h) - D(c - h)) / (2.0 * h)
        if dd == 0:
            return None
        if abs(d) < tol * scale:
            return c, dd
        dc = -d / dd
        lam = 1.0
        for _ in range(30):
            cn = c + lam * dc
            if cn.imag <= 0:
                lam *= 0.5
                continue
            dn = D(cn)
            if abs(dn) < abs(d):
                break
            lam *= 0.5
        else:
            return None
        c, d = cn, dn
        if box is not None:
            x0, x1, y0, y1 = box
            wx, wy = x1 - x0, y1 - y0
            if not (x0 - wx <= c.real <= x1 + wx and y0 - wy <= c.imag <= y1 + wy):
                return None
    if abs(d) < tol * scale:
        h = step * max(1.0, abs(c))
        return c, (D(c + h) - D(c - h)) / (2.0 * h)
    return None


def _inside(c, box):
    x0, x1, y0, y1 = box
    return x0 <= c.real <= x1 and y0 <= c.imag <= y1


def _split(D, box, floor, axis):
    """Split a cell in two along the given axis, avoiding near-zero cut lines."""
    x0, x1, y0, y1 = box
    for frac in (0.5, 0.45, 0.55, 0.4, 0.6, 0.35, 0.65):
        try:
            if axis == 0:
                xm = x0 + frac * (x1 - x0)
                parts = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
            else:
                ym = y0 + frac * (y1 - y0)
                parts = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
            return [(p, winding_number(D, p, floor)) for p in parts]
        except BoundaryZeroError:
            continue
    raise BoundaryZeroError(f"no zero-free cut line found for cell {box}")


def _locate(D, box, n, floor, scale, depth):
    if n == 0:
        return []
    x0, x1, y0, y1 = box
    if n == 1:
        r = _newton(D, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)), scale, box)
        if r is not None and _inside(r[0], box):
            return [r]
    if depth >= MAX_DEPTH:
        r = _newton(D, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)), scale, box)
        if r is None:
            raise BoundaryZeroError(f"could not isolate {n} zero(s) in cell {box}")
        return [r] * n
    axis = 0 if (x1 - x0) >= (y1 - y0) else 1
    parts = _split(D, box, floor, axis)
    out = []
    for p, m in parts:
        out.extend(_locate(D, p, m, floor, scale, depth + 1))
    return out


def find_discrete_spectrum(profile: ShearProfile, alpha: float, box, *,
                           im_floor: float = IM_FLOOR, tol_eig: float = TOL_EIG) -> SpectrumReport:
    """Eigenvalues with Im c > 0 inside box = (re_lo, re_hi, im_lo, im_hi)."""
    x0, x1, y0, y1 = (float(b) for b in box)
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("search box must have positive width and height")
    if not (im_floor > 0) or y0 < im_floor:
        raise ConfigError(f"search box must satisfy Im c >= im_floor > 0 (got {y0:g})")
    D = _Evaluator(profile, alpha)
    scale = dispersion_scale(profile, alpha)
    floor = _BOUNDARY_SAFETY * scale
    n = winding_number(D, (x0, x1, y0, y1), floor)
    roots = _locate(D, (x0, x1, y0, y1), n, floor, scale, 0)
    roots.sort(key=lambda r: (round(r[0].real, 12), round(r[0].imag, 12)))
    rep = SpectrumReport(alpha=alpha, continuous_range=profile.velocity_range(), d_scale=scale)
    rep.discrete = [(c, 1.0 / dd) for c, dd in roots]
    return rep


def _real_newton(D, c0, scale, lo, hi, tol):
    """Newton for a real zero of complex D(c), c real; the step minimises |D + D' dc|."""
    c = float(c0)
    for _ in range(NEWTON_ITERS):
        d = D(c)
        h = FD_STEP * max(1.0, abs(c))
        dd = (D(c + h) - D(c - h)) / (2.0 * h)
        if abs(d) < tol * scale:
            return c, dd
        if dd == 0:
            return None
        dc = -(np.conj(dd) * d).real / abs(dd) ** 2
        lam = 1.0
        while lam > 1e-6:
            cn = c + lam * dc
            if lo <= cn <= hi and abs(D(cn)) < abs(d):
                break
            lam *= 0.5
        else:
            return None
        c = cn
    return None


def find_embedded(profile: ShearProfile, alpha: float, *, n_scan: int = SCAN_POINTS,
                  tol_embed: float = TOL_EMBED, tol_extr: float = TOL_EXTR,
                  tol_eig: float = TOL_EIG, simple_floor: float = SIMPLE_FLOOR,
                  scale: float | None = None) -> list:
    """Real zeros of D inside the velocity range, as (c, simple) pairs."""
    lo, hi = profile.velocity_range()
    if scale is None:
        scale = dispersion_scale(profile, alpha)
    vscale = profile.scale()
    excl = [e.c_extr for e in profile.extremal_layers]
    if profile.far_field:
        excl.append(profile.u_plus)
    rad = 10.0 * tol_extr * vscale
    cs = np.linspace(lo, hi, n_scan + 2)[1:-1]
    ok = np.array([all(abs(c - e) > rad for e in excl) for c in cs])
    D = _Evaluator(profile, alpha)
    vals = np.full(cs.size, np.inf)
    for k in np.nonzero(ok)[0]:
        try:
            vals[k] = abs(D(float(cs[k])))
        except (TailError, ExtremalVelocityError):
            ok[k] = False
    found = []
    for k in range(1, cs.size - 1):
        if not (ok[k - 1] and ok[k] and ok[k + 1]):
            continue
        if vals[k] <= vals[k - 1] and vals[k] <= vals[k + 1] and vals[k] < tol_embed * scale:
            r = _real_newton(D, cs[k], scale, cs[k - 1], cs[k + 1], tol_eig)
            if r is None:
                continue
            c, dd = r
            if any(abs(c - e) <= rad for e in excl):
                continue
            if any(abs(c - f[0]) < 1e-8 * vscale for f in found):
                continue
            if abs(dd) <= simple_floor * scale:
                raise NonSimpleError(f"embedded eigenvalue c={c:.12g} has |dD/dc|={abs(dd):.3g}")
            found.append((c, True))
    found.sort()
    return found


def audit_a3(profile: ShearProfile, alpha: float, scale: float, *, a3_floor: float = A3_FLOOR,
             radius: float = 5e-2, n: int = 12) -> list:
    """Per extremal layer: min |D| over a half-disc neighbourhood of c_extr exceeds a3_floor."""
    flags = []
    vscale = profile.scale()
    for e in profile.extremal_layers:
        m = np.inf
        for r in np.geomspace(1e-6, radius, n) * vscale:
            for ph in (0.0, 0.25, 0.5, 0.75, 1.0):
                c = e.c_extr + r * complex(math.cos(math.pi * ph), math.sin(math.pi * ph))
                try:
                    m = min(m, abs(dispersion_value(profile, alpha, c)))
                except (TailError, ExtremalVelocityError):
                    continue
        flags.append(bool(m > a3_floor * scale))
    return flags


def spectrum_report(profile: ShearProfile, alpha: float, box=None, *, im_floor: float = IM_FLOOR,
                    n_scan: int = SCAN_POINTS, tol_embed: float = TOL_EMBED) -> SpectrumReport:
    """Discrete search, embedded scan and assumption audit in one report."""
    lo, hi = profile.velocity_range()
    if box is None:
        w = hi - lo
        box = (lo - 0.5 * w, hi + 0.5 * w, im_floor, max(w, 1.0))
    rep = find_discrete_spectrum(profile, alpha, box, im_floor=im_floor)
    try:
        rep.embedded = find_embedded(profile, alpha, n_scan=n_scan, tol_embed=tol_embed,
                                     scale=rep.d_scale)
        rep.a4_ok = True
    except NonSimpleError:
        rep.embedded = []
        rep.a4_ok = False
    rep.a3_ok = audit_a3(profile, alpha, rep.d_scale)
    return rep


__all__ = ["DispersionSample", "SpectrumReport", "dispersion", "dispersion_value",
           "dispersion_scale", "winding_number", "find_discrete_spectrum", "find_embedded",
           "audit_a3", "spectrum_report"]
