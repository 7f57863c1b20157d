"""Shear profiles on the half line and their extremal layers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import BPoly, PPoly
from scipy.optimize import brentq

from . import _kernel as K
from .errors import (
    ConfigError,
    DegenerateExtremumError,
    DuplicateExtremalVelocityError,
    MultiRootError,
    NoRootError,
    ValidationError,
)

TOL_ROOT = 1e-10
TOL_NONDEG = 1e-6
Y_MAX = 30.0

KINDS = {
    "builtin-exp": K.KIND_EXP,
    "builtin-jet": K.KIND_JET,
    "builtin-parabola-window": K.KIND_PARABOLA,
    "builtin-linear-window": K.KIND_LINEAR,
    "tabulated": K.KIND_TABULATED,
}

_DEFAULT_PARAMS = {
    "builtin-exp": {"u_plus": 1.0},
    "builtin-jet": {},
    "builtin-parabola-window": {"y0": 1.0, "window": 1.0, "blend": 2.0},
    "builtin-linear-window": {"slope": 1.0},
    "tabulated": {},
}

_NO_ARR = np.zeros(2)
_NO_COEF = np.zeros((1, 1))


@dataclass(frozen=True)
class ProfileSpec:
    kind: str
    params: dict = field(default_factory=dict)
    table_path: str | None = None


@dataclass(frozen=True)
class ExtremalLayer:
    y_extr: float
    c_extr: float
    us2_at_extr: float


@dataclass(frozen=True, eq=False)
class ShearProfile:
    """Validated, immutable shear profile.

    Evaluation goes through the compiled kernel so that the solver and the
    Python side share one definition of U, U' and U''.
    """

    kind: str
    code: int
    prm: np.ndarray
    bx: np.ndarray
    bc: np.ndarray
    u_plus: float
    tail_rate: float
    y_max: float
    extremal_layers: tuple
    far_field: bool = True
    interpolation_order: int | None = None
    tol_root: float = TOL_ROOT
    tol_nondeg: float = TOL_NONDEG

    def kernel_args(self):
        return self.code, self.prm, self.bx, self.bc

    def _eval(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return K.prof_eval_array(np.ascontiguousarray(y.ravel()), *self.kernel_args())

    def us(self, y):
        return self._eval(y)[0].reshape(np.shape(y))

    def us1(self, y):
        return self._eval(y)[1].reshape(np.shape(y))

    def us2(self, y):
        return self._eval(y)[2].reshape(np.shape(y))

    def derivs(self, y):
        """(U, U', U'') sampled on y, shape (3, len(y))."""
        return self._eval(y)

    def eval_complex(self, z):
        """(U, U', U'') at a single complex point."""
        return K.prof_eval(complex(z), *self.kernel_args())

    @property
    def joints(self) -> tuple:
        """Heights where the builtin formula stops being analytic (blend zone ends)."""
        if self.kind == "builtin-parabola-window":
            return (float(self.prm[1]), float(self.prm[2]))
        return ()

    @property
    def c_extr(self):
        return np.array([e.c_extr for e in self.extremal_layers])

    def velocity_range(self, n=20001):
        y = np.linspace(0.0, self.y_max, n)
        u = self.us(y)
        lo, hi = float(u.min()), float(u.max())
        for e in self.extremal_layers:
            lo, hi = min(lo, e.c_extr), max(hi, e.c_extr)
        if self.far_field:
            lo, hi = min(lo, self.u_plus), max(hi, self.u_plus)
        return lo, hi

    @cached_property
    def samples(self):
        """Sorted sample nodes (including extremal points) with U and U' there."""
        y = np.linspace(0.0, self.y_max, 6001)
        extra = [e.y_extr for e in self.extremal_layers]
        y = np.unique(np.concatenate([y, extra]))
        d = self.derivs(y)
        return y, d[0], d[1]

    @cached_property
    def _scale(self):
        lo, hi = self.velocity_range(2001)
        return max(abs(lo), abs(hi), 1e-300)

    def scale(self):
        """Velocity magnitude used to make tolerances relative."""
        return self._scale


def _read_table(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"profile table not found: {path}")
    with path.open() as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows:
        raise ConfigError("profile table is empty")
    header = [h.strip() for h in rows[0]]
    need = ["y", "U", "U1", "U2"]
    if any(h not in header for h in need):
        raise ConfigError(f"profile table header must contain {need}, got {header}")
    idx = [header.index(h) for h in need]
    data = np.array([[float(r[i]) for i in idx] for r in rows[1:] if r], dtype=float)
    if data.shape[0] < 3:
        raise ConfigError("profile table needs at least three rows")
    y = data[:, 0]
    if y[0] != 0.0:
        raise ConfigError("profile table must start at y=0")
    if np.any(np.diff(y) <= 0):
        raise ConfigError("profile table y must be strictly increasing")
    return data


def _tabulated(data):
    """Quintic Hermite interpolant matching U, U', U'' at the nodes (C^2)."""
    y = data[:, 0]
    bp = BPoly.from_derivatives(y, data[:, 1:4])
    pp = PPoly.from_bernstein_basis(bp)
    return np.ascontiguousarray(pp.x, dtype=float), np.ascontiguousarray(pp.c, dtype=float)


def _estimate_tail_rate(y, u, u2, u_plus):
    mag = np.abs(u - u_plus) + np.abs(u2)
    keep = (mag > 1e-14 * max(mag.max(), 1e-300)) & (y >= 0.25 * y[-1])
    if keep.sum() < 3:
        return 1.0
    slope = np.polyfit(y[keep], np.log(mag[keep]), 1)[0]
    return float(max(-slope, 1e-3))


def _find_extremal(profile_like, y_max, tol_root, tol_nondeg, n=40001):
    y = np.linspace(0.0, y_max, n)
    d = K.prof_eval_array(y, *profile_like)
    u1 = d[1]
    scale1 = max(np.abs(u1).max(), 1e-300)
    sgn = np.sign(np.where(np.abs(u1) <= 1e-14 * scale1, 0.0, u1))
    nz = np.nonzero(sgn)[0]
    layers = []
    f1 = lambda x: K.prof_eval(complex(x), *profile_like)[1].real
    for a, b in zip(nz[:-1], nz[1:]):
        if sgn[a] == sgn[b]:
            continue
        r = brentq(f1, y[a], y[b], xtol=1e-15, rtol=1e-15, maxiter=200)
        u, du, d2 = (v.real for v in K.prof_eval(complex(r), *profile_like))
        if abs(du) >= tol_root * max(1.0, scale1):
            continue
        if abs(d2) <= tol_nondeg:
            raise DegenerateExtremumError(
                f"U' vanishes at y={r:.6g} with |U''|={abs(d2):.3g} <= {tol_nondeg:g}")
        layers.append(ExtremalLayer(float(r), float(u), float(d2)))
    cs = sorted(e.c_extr for e in layers)
    cscale = max(1.0, max((abs(v) for v in cs), default=1.0))
    for a, b in zip(cs[:-1], cs[1:]):
        if abs(a - b) <= 1e3 * tol_root * cscale:
            raise DuplicateExtremalVelocityError(
                f"extremal velocities {a:.12g} and {b:.12g} coincide")
    return tuple(layers)


def build_profile(spec: ProfileSpec, y_max: float = Y_MAX, *,
                  tol_root: float = TOL_ROOT, tol_nondeg: float = TOL_NONDEG) -> ShearProfile:
    """Validate a profile specification and return an immutable ShearProfile."""
    if spec.kind not in KINDS:
        raise ConfigError(f"unknown profile kind {spec.kind!r}; expected one of {sorted(KINDS)}")
    if not (y_max > 0):
        raise ConfigError("y_max must be positive")
    params = dict(_DEFAULT_PARAMS[spec.kind])
    unknown = set(spec.params) - set(params) - {"u_plus", "tail_rate"}
    if unknown:
        raise ConfigError(f"unknown parameters for {spec.kind}: {sorted(unknown)}")
    params.update({k: float(v) for k, v in spec.params.items()})
    code = KINDS[spec.kind]
    bx, bc = _NO_ARR, _NO_COEF
    far_field = True
    order = None

    if spec.kind == "builtin-exp":
        u_plus = params["u_plus"]
        prm = np.array([u_plus])
        tail = params.get("tail_rate", 1.0)
    elif spec.kind == "builtin-jet":
        u_plus = 0.0
        prm = np.zeros(1)
        # y e^{-y} <= (10/e) e^{-0.9 y}
        tail = params.get("tail_rate", 0.9)
    elif spec.kind == "builtin-parabola-window":
        y0, w, L = params["y0"], params["window"], params["blend"]
        if min(y0, w, L) <= 0:
            raise ConfigError("parabola window parameters must be positive")
        a, b = y0 + w, y0 + w + L
        # at or above the parabola on the blend zone keeps the blend monotone
        u_plus = params.get("u_plus", (b - y0) ** 2 - y0 ** 2 + 1.0)
        prm = np.array([y0, a, b, u_plus])
        tail = params.get("tail_rate", 5.0)
    elif spec.kind == "builtin-linear-window":
        prm = np.array([params["slope"]])
        u_plus = float("inf")
        tail = params.get("tail_rate", 1.0)
        far_field = False
    else:
        if not spec.table_path:
            raise ConfigError("tabulated profile requires table_path")
        data = _read_table(spec.table_path)
        bx, bc = _tabulated(data)
        prm = np.zeros(1)
        u_plus = float(data[-1, 1])
        tail = params.get("tail_rate") or _estimate_tail_rate(data[:, 0], data[:, 1], data[:, 3], u_plus)
        order = 5

    if far_field and np.exp(-tail * y_max) >= 1e-10:
        raise ValidationError(
            f"y_max={y_max:g} too small for tail rate {tail:g} (need e^(-rate*y_max) < 1e-10)")

    args = (code, prm, bx, bc)
    u0, u10, _ = (v.real for v in K.prof_eval(0j, *args))
    if abs(u0) > tol_root:
        raise ValidationError(f"U(0) = {u0:.3g} != 0")
    if abs(u10) <= tol_root:
        raise ValidationError("U'(0) = 0")

    layers = _find_extremal(args, y_max, tol_root, tol_nondeg)
    prof = ShearProfile(kind=spec.kind, code=code, prm=prm, bx=bx, bc=bc,
                        u_plus=float(u_plus), tail_rate=float(tail), y_max=float(y_max),
                        extremal_layers=layers, far_field=far_field,
                        interpolation_order=order, tol_root=tol_root, tol_nondeg=tol_nondeg)
    if far_field:
        _check_tail(prof)
    return prof


def _check_tail(prof, n=3001):
    """Exponential convergence: the weighted tail must not outgrow the near field."""
    y = np.linspace(0.0, prof.y_max, n)
    u, _, u2 = prof.derivs(y)
    w = np.exp(prof.tail_rate * y)
    g = np.maximum(np.abs(u - prof.u_plus), np.abs(u2)) * w
    cut = n // 3
    near, far = g[:cut].max(), g[cut:].max()
    if not np.isfinite(far) or far > 10.0 * max(near, 1e-300):
        raise ValidationError(f"profile does not converge at rate {prof.tail_rate:g}")


def critical_layer(profile: ShearProfile, c_real: float, bracket) -> float:
    """Unique y in the bracket with U(y) = c_real."""
    a, b = float(bracket[0]), float(bracket[1])
    n = 2001
    y = np.linspace(a, b, n)
    u, u1, _ = profile.derivs(y)
    s1 = np.sign(u1[np.abs(u1) > 1e-14 * max(np.abs(u1).max(), 1e-300)])
    if s1.size and np.any(s1 != s1[0]):
        raise MultiRootError(f"U' changes sign inside [{a:g}, {b:g}]")
    lo, hi = min(u[0], u[-1]), max(u[0], u[-1])
    if not (lo <= c_real <= hi):
        raise NoRootError(f"c={c_real:g} outside U([{a:g},{b:g}]) = [{lo:g},{hi:g}]")
    f = lambda x: profile.us(x) - c_real
    if f(a) == 0:
        return a
    if f(b) == 0:
        return b
    return float(brentq(f, a, b, xtol=1e-15, rtol=1e-15, maxiter=200))


def profile_from_config(kind: str, params: dict | None = None, table: str | None = None,
                        y_max: float = Y_MAX, **tols) -> ShearProfile:
    return build_profile(ProfileSpec(kind, dict(params or {}), table), y_max, **tols)
