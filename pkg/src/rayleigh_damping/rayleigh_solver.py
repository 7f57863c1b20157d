"""Solutions of the Rayleigh equation (U-c)(psi''-a^2 psi) - U'' psi = f.

The workhorse is a compiled adaptive DOP853 sweep along a polyline in the
complex y-plane.  For real (or nearly real) c the path leaves the real axis
around each critical layer y_c, on the side selected by the limit Im c -> 0+
(below when U'(y_c) > 0, above otherwise), so boundary values on the real
c-axis are obtained directly instead of by extrapolation in Im c.

Normalizations
    psi_minus  decays at infinity, psi_minus ~ e^{-a y} (unit tail).
    psi_plus   partner with psi_plus(y_r) = 0 and unit Wronskian
               psi_plus' psi_minus - psi_minus' psi_plus = 1, where y_r is the
               reference point returned by reference_point().
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import _kernel as K
from .errors import (
    BranchError,
    ExtremalVelocityError,
    NoContractionError,
    PoleError,
    QuadratureError,
    TailError,
    WindowError,
)
from .profile import ShearProfile

RTOL = 1e-12
ATOL = 1e-300
BUDGET = 2_000_000
RHO_MAX = 0.02
TOL_EXTR = 1e-8
TOL_TAIL = 1e-6
GRID_CAP = 100_000
_SIDE_DELTA = 1e-10
_FLOOR = 1e-3

NORM_MINUS = "decaying-unit-tail"
NORM_PLUS = "wronskian-partner"


# ----------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class SpectralParams:
    """Wavenumber alpha and complex wave speed c (Laplace variable -i alpha c)."""

    alpha: float
    c: complex
    continued: bool = False   # permits Im c < 0 where U - c has no real zero

    def __post_init__(self):
        a = float(self.alpha)
        c = complex(self.c)
        if not (math.isfinite(a) and a >= 0.0):
            raise ValueError(f"alpha must be finite and non-negative, got {self.alpha!r}")
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError("c must be finite")
        if c.imag < 0.0 and not self.continued:
            raise ValueError("Im c must be >= 0 (lower half plane is not supported)")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "c", c)

    @property
    def lam(self) -> complex:
        return -1j * self.alpha * self.c

    @property
    def on_real_axis(self) -> bool:
        return self.c.imag == 0.0


@dataclass(frozen=True, eq=False)
class ModeSolution:
    params: SpectralParams
    grid: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    normalization: str

    def residual(self, profile: ShearProfile) -> np.ndarray:
        """Relative Rayleigh residual at interior nodes.

        psi'' is recovered by fourth-order finite differences of the sampled
        psi'; the residual is divided by the size of the largest term.
        """
        y = self.grid
        d2 = _fd_derivative(y, self.dpsi)
        u, _, u2 = profile.derivs(y)
        a2 = self.params.alpha ** 2
        den = u - self.params.c
        res = den * (d2 - a2 * self.psi) - u2 * self.psi
        size = np.abs(den) * (np.abs(d2) + a2 * np.abs(self.psi)) + np.abs(u2 * self.psi)
        scale = max(float(size.max()), 1e-300)
        return np.abs(res[2:-2]) / scale

    def tail_error(self) -> float:
        y = self.grid[-1]
        return abs(self.psi[-1] * math.exp(self.params.alpha * y) - 1.0)

    def to_csv(self, path) -> None:
        from . import __version__

        with open(path, "w", newline="") as fh:
            fh.write(f"# rayleigh-damping {__version__} mode-solution v1\n")
            fh.write(f"# alpha={self.params.alpha!r}\n")
            fh.write(f"# c={self.params.c.real!r},{self.params.c.imag!r}\n")
            fh.write(f"# normalization={self.normalization}\n")
            fh.write("y,re_psi,im_psi,re_dpsi,im_dpsi\n")
            for row in zip(self.grid, self.psi, self.dpsi):
                y, p, d = row
                fh.write(f"{y!r},{p.real!r},{p.imag!r},{d.real!r},{d.imag!r}\n")


@dataclass(frozen=True, eq=False)
class ModeBasis:
    psi_minus: ModeSolution
    psi_plus: ModeSolution
    wronskian: complex
    info: dict = field(default_factory=dict)

    def wronskian_profile(self) -> np.ndarray:
        m, p = self.psi_minus, self.psi_plus
        return p.dpsi * m.psi - m.dpsi * p.psi


@dataclass(frozen=True)
class ExtremalFrame:
    """Rescaled coordinates around an extremal layer.

    With k = U''(y_e)/2 the local profile is U ~ c_e + k s^2, s = y - y_e,
    and c_off = (c - c_e)/k.  On the two-point branch (Re c_off > 0) the
    turning points s_pm solve U = Re c and z_pm = s_pm / sqrt(Re c_off);
    otherwise the alternate parabola theta(v) = -Re c_off + v^2 is used.
    """

    y_extr: float
    c_extr: float
    c_off: complex
    scale: float
    beta_coef: float
    z_minus: complex
    z_plus: complex
    z1: complex
    z2: complex
    branch: str

    @property
    def sigma(self) -> complex:
        return self.beta_coef ** (2.0 / 3.0) * np.sqrt(complex(self.c_off))

    def P(self, v):
        """The basis polynomials P0..P3 at v."""
        v = complex(v)
        q = (v - self.z1) * (v - self.z2)
        return np.array([1.0 + 0j, v, q, v * q])


# ----------------------------------------------------------------------------
# helpers


def _fd_derivative(x, f):
    """Derivative of samples f on a non-uniform grid, five-point stencils."""
    n = len(x)
    out = np.empty(n, dtype=complex)
    for i in range(n):
        lo = min(max(i - 2, 0), n - 5)
        xs = x[lo:lo + 5]
        w = _fornberg(x[i], xs)
        out[i] = w @ f[lo:lo + 5]
    return out


def _fornberg(x0, xs):
    """First-derivative weights at x0 for nodes xs (Taylor moment conditions)."""
    h = xs - x0
    scale = max(float(np.max(np.abs(h))), 1e-300)
    t = h / scale
    n = len(xs)
    V = np.vander(t, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs) / scale


def reference_point(profile: ShearProfile) -> float:
    """Point y_r where psi_plus vanishes.

    It lies to the left of every extremal layer so that psi_plus stays small
    there as c approaches an extremal velocity.
    """
    if profile.extremal_layers:
        return 0.2 * min(e.y_extr for e in profile.extremal_layers)
    return min(0.5, 0.25 * profile.y_max)


def check_extremal(profile: ShearProfile, c: complex, tol_extr: float = TOL_EXTR) -> None:
    if c.imag != 0.0:
        return
    scale = profile.scale()
    for e in profile.extremal_layers:
        if abs(c.real - e.c_extr) < tol_extr * scale:
            raise ExtremalVelocityError(
                f"c={c.real:.12g} is within {tol_extr:g} of the extremal velocity {e.c_extr:.12g}")


class Forcing:
    """Complex forcing f(y) held as a cubic spline, zero outside its support."""

    def __init__(self, y, values):
        y = np.asarray(y, dtype=float)
        v = np.asarray(values, dtype=complex)
        if y.ndim != 1 or y.shape != v.shape or len(y) < 4:
            raise ValueError("forcing needs matching 1-D samples with at least four nodes")
        mag = np.abs(v)
        big = mag > 1e-17 * max(float(mag.max()), 1e-300)
        if not big.any():
            self.fx = np.zeros(2)
            self.fc = np.zeros((1, 1), dtype=complex)
            self.zero = True
            self.support = (0.0, 0.0)
            self.peak = 0.0
            self.center = 0.0
            return
        hi = min(int(np.nonzero(big)[0][-1]) + 3, len(y) - 1)
        hi = max(hi, 3)
        v = v.copy()
        if hi < len(y) - 1:
            v[hi] = 0.0  # continuous cut-off at the end of the support
        sp = CubicSpline(y[:hi + 1], v[:hi + 1])
        self.fx = np.ascontiguousarray(sp.x)
        self.fc = np.ascontiguousarray(sp.c.astype(complex))
        self.zero = False
        self.support = (float(y[0]), float(y[hi]))
        self.peak = float(mag.max())
        self.center = float(np.sum(y * mag) / np.sum(mag))

    def __call__(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return np.array([K.forcing_eval(complex(t), self.fx, self.fc) for t in y])

    @classmethod
    def none(cls):
        obj = cls.__new__(cls)
        obj.fx = np.zeros(2)
        obj.fc = np.zeros((1, 1), dtype=complex)
        obj.zero = True
        obj.support = (0.0, 0.0)
        obj.peak = 0.0
        obj.center = 0.0
        return obj


# ----------------------------------------------------------------------------
# critical layers and the integration path


def real_roots(profile: ShearProfile, c_real: float):
    """All y in [0, y_max] with U(y) = c_real, with U'(y); sorted ascending."""
    y, u, _ = profile.samples
    d = u - c_real
    out = []
    f = lambda x: K.prof_eval(complex(x), *profile.kernel_args())[0].real - c_real
    for i in np.nonzero(d == 0.0)[0]:
        out.append(float(y[i]))
    s = np.sign(d)
    for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        out.append(float(brentq(f, y[i], y[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)))
    out = sorted(set(out))
    return [(r, K.prof_eval(complex(r), *profile.kernel_args())[1].real) for r in out]


@dataclass
class _Detour:
    """Box detour [y-rho, y+rho] x offset side*rho around a critical layer."""

    y: float
    rho: float
    side: complex
    delta: float
    wall: bool
    items: list = field(default_factory=list)   # (x, node index or None for the spawn)

    @property
    def lo(self):
        return 0.0 if self.wall else self.y - self.rho

    def target(self, x):
        """Real point x, nudged off the singular point when it coincides with y."""
        if abs(x - self.y) <= 1e-9 * (1.0 + self.y):
            return self.y + self.side * self.delta
        return complex(x)


def _plan_detours(profile, c, nodes, y_ref, y_top, avoid=()):
    roots = [r for r in real_roots(profile, c.real) if r[0] < y_top]
    scale = profile.scale()
    plans = []
    for k, (yc, d1) in enumerate(roots):
        if abs(d1) <= 1e-9 * max(scale, 1.0):
            continue
        rho = RHO_MAX
        if k > 0:
            rho = min(rho, 0.3 * (yc - roots[k - 1][0]))
        if k < len(roots) - 1:
            rho = min(rho, 0.3 * (roots[k + 1][0] - yc))
        rho = min(rho, 0.5 * (y_top - yc))
        for j in profile.joints:
            # a detour box must not cross a non-analytic joint of the profile
            rho = min(rho, 0.9 * abs(j - yc)) if abs(j - yc) > 0 else rho
        for a in avoid:
            if abs(a - yc) <= 1e-9 * (1.0 + yc):
                raise PoleError(f"point {a} lies on the critical layer {yc}")
            rho = min(rho, 0.45 * abs(a - yc))
        if c.imag > 2.0 * rho * abs(d1):
            continue
        wall = yc < rho
        plan = _Detour(y=yc, rho=rho, side=(-1j if d1 > 0 else 1j),
                       delta=(0.0 if c.imag > 0 else _SIDE_DELTA * (1.0 + yc)), wall=wall)
        hi = yc + rho
        def within(x):
            return (x >= 0.0 if wall else x > plan.lo) & (x < hi)

        plan.items = [(float(nodes[j]), int(j)) for j in np.nonzero(within(nodes))[0]]
        if y_ref is not None and within(y_ref):
            plan.items.append((float(y_ref), None))
        plans.append(plan)
    return plans


class _Path:
    def __init__(self):
        self.z = []
        self.t = []
        self.i = []

    def add(self, z, t=K.WP_MOVE, i=-1):
        self.z.append(complex(z))
        self.t.append(t)
        self.i.append(i)

    def arrays(self):
        return (np.array(self.z, dtype=complex), np.array(self.t, dtype=np.int64),
                np.array(self.i, dtype=np.int64))


def _box(path, p, sgn, items):
    """Cross detour box p in direction sgn, visiting the given (x, j) items."""
    o = p.side * p.rho
    hi = p.y + p.rho
    first, last = (hi, p.lo) if sgn < 0 else (p.lo, hi)
    path.add(first)
    path.add(first + o)
    # the spawn precedes nodes at the same height so their records carry the partner
    for x, j in sorted(items, key=lambda it: (sgn * it[0], it[1] is not None)):
        path.add(x + o)
        if j is None:
            path.add(p.target(x), K.WP_SPAWN)
            path.add(x + o)
        else:
            path.add(p.target(x), K.WP_SIDE, j)
    if sgn < 0 and p.wall:
        return
    path.add(last + o)
    path.add(last)


def _inward_path(nodes, plans, y_ref, y_start):
    """Descending path from y_start to the wall; records every node."""
    attached = {j for p in plans for _, j in p.items if j is not None}
    spawn_in_box = any(j is None for p in plans for _, j in p.items)
    ev = []
    for j, yj in enumerate(nodes):
        if j not in attached:
            ev.append((yj, 1, j))
    if y_ref is not None and not spawn_in_box:
        ev.append((y_ref, 0, None))
    for p in plans:
        ev.append((p.y, 2, p))
    ev.sort(key=lambda e: (-e[0], e[1]))
    path = _Path()
    for pos, kind, obj in ev:
        if kind == 0:
            path.add(pos, K.WP_SPAWN)
        elif kind == 1:
            path.add(pos, K.WP_MOVE, obj)
        else:
            _box(path, obj, -1, obj.items)
            if obj.wall:
                break
    return path


def _outward_path(nodes, plans, y_ref):
    """Ascending path from the reference point; records nodes above it."""
    start = complex(y_ref)
    home = None
    for p in plans:
        if any(j is None for _, j in p.items):
            home = p
            start = p.target(y_ref)
    attached = {j for p in plans for _, j in p.items if j is not None}
    ev = []
    recorded = []
    for j, yj in enumerate(nodes):
        if j not in attached and yj > y_ref:
            ev.append((yj, 1, j))
            recorded.append(j)
    for p in plans:
        if p is not home and p.y > y_ref:
            ev.append((p.y, 2, p))
    ev.sort(key=lambda e: e[0])
    path = _Path()

    def above(p, lo):
        its = [(x, j) for x, j in p.items if j is not None and x > lo]
        recorded.extend(j for _, j in its)
        return its

    if home is not None:
        o = home.side * home.rho
        path.add(y_ref + o)
        for x, j in sorted(above(home, y_ref)):
            path.add(x + o)
            path.add(home.target(x), K.WP_SIDE, j)
        path.add(home.y + home.rho + o)
        path.add(home.y + home.rho)
    for pos, kind, obj in ev:
        if kind == 1:
            path.add(pos, K.WP_MOVE, obj)
        else:
            _box(path, obj, +1, above(obj, -1.0))
    return start, path, recorded


# ----------------------------------------------------------------------------
# sweeps


def tail_state(profile: ShearProfile, alpha: float, c: complex):
    """Start height and decaying far-field data (psi, psi') with a first-order tail term."""
    Y = profile.y_max
    b = profile.tail_rate
    delta = 0j
    if profile.far_field:
        gap = abs(profile.u_plus - c)
        if gap <= 1e-12 * profile.scale():
            raise TailError(f"c={c} coincides with the far-field velocity {profile.u_plus:g}")
        if gap < 1e-3:
            Y += 10.0 / b
        u, _, u2 = K.prof_eval(complex(Y), *profile.kernel_args())
        delta = (u2 / (u - c)) / (b * b + 2.0 * alpha * b)
        if abs(delta) > 0.1:
            raise TailError(f"c={c} too close to U+={profile.u_plus:g} for exponential tails")
    elif abs(K.prof_eval(complex(Y), *profile.kernel_args())[0] - c) <= 1e-12 * profile.scale():
        raise TailError(f"c={c} is attained at the start height y={Y:g}")
    if alpha * Y > 650.0:
        raise ValueError(f"alpha*y_max = {alpha * Y:g} overflows the tail normalization")
    e = math.exp(-alpha * Y)
    return Y, e * (1.0 + delta), e * (-alpha * (1.0 + delta) - b * delta)


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Per-node values of the decaying solution, its partner and the forced parts."""

    params: SpectralParams
    nodes: np.ndarray
    u0: np.ndarray
    du0: np.ndarray
    u1: np.ndarray
    du1: np.ndarray
    p: np.ndarray
    dp: np.ndarray
    Q0: np.ndarray
    Q1: np.ndarray
    i0: int
    steps: int

    @property
    def D(self) -> complex:
        return complex(self.u0[self.i0])

    @property
    def psi_plus0(self) -> complex:
        return complex(self.u1[self.i0])

    @property
    def B0(self) -> complex:
        """Integral of psi_minus f/(U-c) over the half line."""
        return complex(-self.Q0[self.i0])

    def resolvent(self):
        """Interior and boundary parts (psi^int, dpsi^int, psi^b, dpsi^b)."""
        A = self.Q1 - self.Q1[self.i0]
        psi_i = -self.u0 * A + self.u1 * self.Q0
        dpsi_i = -self.du0 * A + self.du1 * self.Q0
        kappa = self.u1[self.i0] / self.u0[self.i0]
        B0 = self.B0
        return psi_i, dpsi_i, kappa * B0 * self.u0, kappa * B0 * self.du0

    def particular(self):
        """Resolvent from the particular solution, psi = p - (p(0)/D) psi_minus."""
        r = self.p[self.i0] / self.u0[self.i0]
        return self.p - r * self.u0, self.dp - r * self.du0


def _atol(profile, alpha, c, fz, rtol):
    """Absolute floors for the forced components, from rough magnitude estimates.

    The forced components start from zero, so pure relative control cannot
    accept the first steps into the support of the forcing.
    """
    at = np.full(K.NSTATE, ATOL)
    if fz.zero:
        return at
    lo, hi = fz.support
    ys = np.linspace(lo, hi, 401)
    u, u1, _ = profile.derivs(ys)
    den = np.maximum(np.abs(u - c), abs(c.imag) + RHO_MAX * np.abs(u1))
    g = fz.peak / max(float(np.min(den)), 1e-12 * profile.scale())
    ell = 1.0 / max(alpha, 0.1)
    width = max(hi - lo, 1e-3)
    est = np.array([0, 0, 0, 0, g * ell * ell, g * ell,
                    g * width * math.exp(-alpha * lo), g * width * math.exp(alpha * hi)])
    at[4:] = np.maximum(rtol * _FLOOR * est[4:], ATOL)
    return at


def sweep(profile: ShearProfile, alpha: float, c: complex, nodes, *, forcing: Forcing | None = None,
          partner: bool = True, rtol: float = RTOL, tol_extr: float = TOL_EXTR,
          y_ref: float | None = None, continued: bool = False) -> SweepResult:
    """Integrate the Rayleigh system and sample it at the given nodes (0 is always added).

    With continued=True, Im c < 0 is accepted when Re c lies outside the
    velocity range; there the resolvent continues analytically across the
    real axis.
    """
    c = complex(c)
    params = SpectralParams(alpha, c, continued)
    if c.imag < 0.0 and real_roots(profile, c.real):
        raise BranchError(f"c={c}: continuation below the real axis needs Re c outside the range")
    check_extremal(profile, c, tol_extr)
    nodes_in = np.asarray(nodes, dtype=float)
    if nodes_in.ndim != 1 or nodes_in.size == 0:
        raise ValueError("nodes must be a non-empty 1-D array")
    if nodes_in.min() < 0.0 or nodes_in.max() > profile.y_max:
        raise ValueError("nodes must lie in [0, y_max]")
    zero_missing = not np.any(nodes_in == 0.0)
    allnodes = np.concatenate([nodes_in, [0.0]]) if zero_missing else nodes_in
    i0 = int(np.nonzero(allnodes == 0.0)[0][0])
    n = allnodes.size

    Y, v0, d0 = tail_state(profile, alpha, c)
    if y_ref is None and partner:
        y_ref = reference_point(profile)
    if not partner:
        y_ref = None
    plans = _plan_detours(profile, c, allnodes, y_ref, Y)
    fz = forcing if forcing is not None else Forcing.none()
    forced = not fz.zero
    args = profile.kernel_args()
    at = _atol(profile, alpha, c, fz, rtol)

    s0 = np.zeros(K.NSTATE, dtype=complex)
    s0[0], s0[1] = v0, d0
    path = _inward_path(allnodes, plans, y_ref, Y)
    wp, wt, wi = path.arrays()
    if partner:
        wi[np.nonzero(wt == K.WP_SPAWN)[0][0]] = n
    rec, status, steps = K.sweep(wp, wt, wi, complex(Y), s0, c, alpha, *args, fz.fx, fz.fc,
                                 forced, rtol, at, BUDGET, n + 1)
    if status != K.STATUS_OK:
        raise QuadratureError(f"inward sweep failed (status {status}) at alpha={alpha}, c={c}")
    total = steps
    u1 = rec[:n, 2].copy()
    du1 = rec[:n, 3].copy()
    Q1 = rec[:n, 7].copy()
    if partner:
        start, opath, recorded = _outward_path(allnodes, plans, y_ref)
        if recorded:
            owp, owt, owi = opath.arrays()
            orec, status, steps = K.sweep(owp, owt, owi, start, rec[n].copy(), c, alpha, *args,
                                          fz.fx, fz.fc, forced, rtol, at, BUDGET, n)
            if status != K.STATUS_OK:
                raise QuadratureError(f"outward sweep failed (status {status}) at c={c}")
            total += steps
            idx = np.array(recorded, dtype=int)
            u1[idx] = orec[idx, 2]
            du1[idx] = orec[idx, 3]
            Q1[idx] = orec[idx, 7]
    return SweepResult(params=params, nodes=allnodes, u0=rec[:n, 0], du0=rec[:n, 1], u1=u1,
                       du1=du1, p=rec[:n, 4], dp=rec[:n, 5], Q0=rec[:n, 6], Q1=Q1, i0=i0,
                       steps=total)


# ----------------------------------------------------------------------------
# grids


def default_grid(profile: ShearProfile, c: complex, base: float = 0.02, cap: int = GRID_CAP):
    """Graded grid on [0, y_max], refined near critical and extremal layers."""
    c = complex(c)
    aux = np.linspace(0.0, profile.y_max, 200001)
    dens = (1.0 / base) / (1.0 + np.maximum(aux - 5.0, 0.0) / 5.0)
    if profile.velocity_range()[0] <= c.real <= profile.velocity_range()[1]:
        for yc, d1 in real_roots(profile, c.real):
            w = max(abs(c.imag) / max(abs(d1), 1e-12), 1e-4)
            dens = dens + 4.0 / np.sqrt((aux - yc) ** 2 + w * w)
    for e in profile.extremal_layers:
        w = math.sqrt(abs(c - e.c_extr) / abs(e.us2_at_extr)) + 1e-4
        dens = dens + 8.0 / np.sqrt((aux - e.y_extr) ** 2 + w * w)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(aux))])
    m = int(min(max(math.ceil(cum[-1]), 16), cap - 1))
    y = np.interp(np.linspace(0.0, cum[-1], m + 1), cum, aux)
    y[0], y[-1] = 0.0, profile.y_max
    return np.unique(y)


# ----------------------------------------------------------------------------
# canonical solutions


def _as_params(params, alpha=None, c=None):
    if isinstance(params, SpectralParams):
        return params
    return SpectralParams(alpha, c)


def solve_minus(profile: ShearProfile, params: SpectralParams, grid=None, *,
                rtol: float = RTOL, tol_extr: float = TOL_EXTR) -> ModeSolution:
    """Decaying solution psi_minus with unit e^{-alpha y} tail."""
    grid = default_grid(profile, params.c) if grid is None else np.asarray(grid, dtype=float)
    r = sweep(profile, params.alpha, params.c, grid, partner=False, rtol=rtol, tol_extr=tol_extr)
    k = len(grid)
    return ModeSolution(params, grid, r.u0[:k].copy(), r.du0[:k].copy(), NORM_MINUS)


def solve_basis(profile: ShearProfile, params: SpectralParams, grid=None, *,
                rtol: float = RTOL, tol_extr: float = TOL_EXTR) -> ModeBasis:
    grid = default_grid(profile, params.c) if grid is None else np.asarray(grid, dtype=float)
    r = sweep(profile, params.alpha, params.c, grid, partner=True, rtol=rtol, tol_extr=tol_extr)
    k = len(grid)
    m = ModeSolution(params, grid, r.u0[:k].copy(), r.du0[:k].copy(), NORM_MINUS)
    p = ModeSolution(params, grid, r.u1[:k].copy(), r.du1[:k].copy(), NORM_PLUS)
    w = p.dpsi * m.psi - m.dpsi * p.psi
    return ModeBasis(m, p, complex(np.median(w.real) + 1j * np.median(w.imag)),
                     info={"y_ref": reference_point(profile), "steps": r.steps})


def solve_plus(profile: ShearProfile, psi_minus: ModeSolution, *, rtol: float = RTOL) -> ModeBasis:
    """Partner solution with unit Wronskian on the grid of psi_minus."""
    b = solve_basis(profile, psi_minus.params, psi_minus.grid, rtol=rtol)
    return ModeBasis(psi_minus, b.psi_plus, b.wronskian, b.info)


# ----------------------------------------------------------------------------
# closed forms and local constructions


def explicit_psi2_parabola(y, c):
    """Second alpha=0 solution for U=y^2: -y/(2 sqrt c) + (y^2-c)/(4c) log((y+sqrt c)/(y-sqrt c)).

    The logarithm is Log(y + sqrt c) - Log(y - sqrt c) with principal
    branches, which is analytic in c off the cut [0, inf).
    """
    c = complex(c)
    if c.imag == 0.0 and c.real >= 0.0:
        raise BranchError("c on the cut [0, inf): the logarithm is not defined")
    r = np.sqrt(c)
    y = np.asarray(y, dtype=float)
    a = y + r
    b = y - r
    if np.any(a == 0) or np.any(b == 0):
        raise BranchError("y = +-sqrt(c)")
    return -y / (2.0 * r) + (y * y - c) / (4.0 * c) * (np.log(a) - np.log(b))


def local_iteration_solution(profile: ShearProfile, params: SpectralParams, center: float,
                             halfwidth: float, n: int = 2001, tol: float = 1e-14,
                             max_iter: int = 200) -> ModeBasis:
    """Local basis from the alpha=0 pair by the fixed-point iteration psi = psi0 + alpha^2 G psi.

    G h(y) = psi2(y) int_center^y psi1 h - psi1(y) int_center^y psi2 h is the
    initial-value Green operator of the alpha=0 equation.
    """
    c = params.c
    a2 = params.alpha ** 2
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")
    n += (n + 1) % 2
    y = np.linspace(center - halfwidth, center + halfwidth, n)
    if y[0] < 0 or y[-1] > profile.y_max:
        raise WindowError("iteration window leaves [0, y_max]")
    mid = n // 2
    u, u1, _ = profile.derivs(y)
    psi1 = u - c
    if np.min(np.abs(psi1)) <= 1e-12 * profile.scale():
        raise PoleError("U - c vanishes on the window; use Im c > 0")

    def prim(g):
        s = (cumulative_simpson(g.real, x=y, initial=0)
             + 1j * cumulative_simpson(g.imag, x=y, initial=0))
        return s - s[mid]

    I = prim(psi1 ** -2)
    psi2 = psi1 * I
    dpsi1 = u1.astype(complex)
    dpsi2 = u1 * I + 1.0 / psi1

    def green(h):
        A = prim(psi1 * h)
        B = prim(psi2 * h)
        return psi2 * A - psi1 * B, dpsi2 * A - dpsi1 * B

    out = []
    hist = []
    for base, dbase in ((psi1, dpsi1), (psi2, dpsi2)):
        cur, dcur = base.copy(), dbase.copy()
        res = []
        for _ in range(max_iter):
            g, dg = green(cur)
            new, dnew = base + a2 * g, dbase + a2 * dg
            r = float(np.max(np.abs(new - cur)))
            res.append(r)
            cur, dcur = new, dnew
            floor = tol * max(float(np.max(np.abs(cur))), 1e-300)
            if r <= floor:
                break
            # rounding noise near the floor is not a contraction failure
            if len(res) >= 3 and res[-1] > 0.5 * res[-2] and r > 1e3 * floor:
                raise NoContractionError(
                    f"iteration ratio {res[-1] / res[-2]:.3g} > 1/2 (halfwidth too large)")
        else:
            raise NoContractionError("iteration did not converge")
        out.append((cur, dcur))
        hist.append(res)
    m = ModeSolution(params, y, out[0][0], out[0][1], "local-psi1")
    p = ModeSolution(params, y, out[1][0], out[1][1], "local-psi2")
    w = p.dpsi * m.psi - m.dpsi * p.psi
    return ModeBasis(m, p, complex(w[mid]), info={"residuals": hist})


def extremal_frame(profile: ShearProfile, l: int, c: complex, window: float = 0.1) -> ExtremalFrame:
    """Rescaled frame (z_pm, beta, z1, z2) near extremal layer l."""
    e = profile.extremal_layers[l]
    k = 0.5 * e.us2_at_extr
    c = complex(c)
    ct = (c - e.c_extr) / k
    if abs(ct) > window or ct == 0:
        raise WindowError(f"|c_off|={abs(ct):.3g} outside the extremal window (0, {window:g}]")
    if ct.real > 0:
        r = math.sqrt(ct.real)
        g = lambda s: (K.prof_eval(complex(e.y_extr + s), *profile.kernel_args())[0].real
                       - e.c_extr) / k - ct.real
        sp = _bracket_root(g, r, +1)
        sm = _bracket_root(g, r, -1)
        zp, zm = sp / r, sm / r
        beta = 0.25 * (zp - zm) ** 2
        # beta Re(ct) (v - zm)(v - zp) = i Im(ct)
        s_ = zp + zm
        p_ = zp * zm - 1j * ct.imag / (beta * ct.real)
        disc = np.sqrt(complex(s_ * s_ - 4.0 * p_))
        z1, z2 = (s_ + disc) / 2.0, (s_ - disc) / 2.0
        return ExtremalFrame(e.y_extr, e.c_extr, ct, r, beta, complex(zm), complex(zp),
                             complex(z1), complex(z2), "two-point")
    r = math.sqrt(abs(ct))
    zz = np.sqrt(complex(ct)) / r
    za = np.sqrt(complex(ct.real)) / r
    return ExtremalFrame(e.y_extr, e.c_extr, ct, r, 1.0, -za, za, complex(zz), complex(-zz),
                         "alternate")


def _bracket_root(g, r, sgn):
    lo, hi = 0.0, 2.0 * r
    for _ in range(60):
        if g(sgn * hi) > 0:
            break
        hi *= 1.5
    else:
        raise WindowError("turning point not found near the extremal layer")
    return sgn * brentq(lambda s: g(sgn * s), lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def eval_J_primitives(frame: ExtremalFrame, v):
    """Primitives J0..J3 of P_j(v) / ((v-z1)^2 (v-z2)^2)."""
    v = complex(v)
    z1, z2 = frame.z1, frame.z2
    for z in (z1, z2):
        if abs(v - z) <= 1e-14 * (1.0 + abs(z)):
            raise PoleError(f"v={v} coincides with a root {z}")
    a, b = v - z1, v - z2
    la, lb = np.log(a), np.log(b)
    L = la - lb
    d = z2 - z1
    J0 = 2.0 / d ** 3 * L - (1.0 / a + 1.0 / b) / d ** 2
    J1 = (z1 + z2) / d ** 3 * L - (z1 / a + z2 / b) / d ** 2
    J2 = L / (z1 - z2)
    J3 = (z1 * la - z2 * lb) / (z1 - z2)
    return np.array([J0, J1, J2, J3])


def extremal_local_pair(profile: ShearProfile, l: int, alpha: float, c: complex,
                        halfwidth: float | None = None, n: int = 201, rtol: float = RTOL) -> ModeBasis:
    """Local pair Psi_pm anchored on either side of extremal layer l.

    Psi_-(y_e + h) = 0 and Psi_+(y_e - h) = 0, each with derivative
    1/(U - c) there (the alpha=0 pair (U-c) int du/(U-c)^2 in that limit).
    Their Wronskian W(c) grows like |c - c_e|^{-3/2}.
    """
    e = profile.extremal_layers[l]
    if halfwidth is None:
        others = [abs(o.y_extr - e.y_extr) for o in profile.extremal_layers if o is not e]
        halfwidth = min([0.25, 0.5 * e.y_extr] + [0.45 * d for d in others])
    c = complex(c)
    yl, yr = e.y_extr - halfwidth, e.y_extr + halfwidth
    grid = np.linspace(yl, yr, n)
    args = profile.kernel_args()
    sols = []
    for y0 in (yr, yl):
        u = K.prof_eval(complex(y0), *args)[0]
        sols.append(_ivp(profile, alpha, c, y0, 0j, 1.0 / (u - c), grid, rtol))
    (m, dm), (p, dp) = sols
    params = SpectralParams(alpha, c)
    sm = ModeSolution(params, grid, m, dm, "local-right")
    sp = ModeSolution(params, grid, p, dp, "local-left")
    w = dp * m - dm * p
    return ModeBasis(sm, sp, complex(w[n // 2]), info={"halfwidth": halfwidth})


def _ivp(profile, alpha, c, y0, v, dv, nodes, rtol=RTOL):
    """Solution with data (v, dv) at real y0, sampled at real nodes on either side."""
    nodes = np.asarray(nodes, dtype=float)
    plans = _plan_detours(profile, complex(c), nodes, None, profile.y_max, avoid=(y0,))
    out = np.zeros(nodes.size, dtype=complex)
    dout = np.zeros(nodes.size, dtype=complex)
    args = profile.kernel_args()
    for sgn in (-1, +1):
        sel = np.nonzero((nodes - y0) * sgn >= 0)[0]
        if sel.size == 0:
            continue
        path = _Path()
        ev = [(nodes[j], 1, int(j)) for j in sel]
        ev += [(p.y, 2, p) for p in plans if (p.y - y0) * sgn > 0]
        ev.sort(key=lambda e: sgn * e[0])
        attached = {j for p in plans for _, j in p.items}
        ev = [e for e in ev if e[1] == 2 or e[2] not in attached]
        for pos, kind, obj in ev:
            if kind == 1:
                path.add(pos, K.WP_MOVE, obj)
            else:
                _box(path, obj, sgn, obj.items)
        wp, wt, wi = path.arrays()
        s0 = np.zeros(K.NSTATE, dtype=complex)
        s0[0], s0[1] = v, dv
        rec, status, _ = K.sweep(wp, wt, wi, complex(y0), s0, complex(c), alpha, *args,
                                 np.zeros(2), np.zeros((1, 1), dtype=complex), False, rtol,
                                 np.full(K.NSTATE, ATOL), BUDGET, nodes.size)
        if status != K.STATUS_OK:
            raise QuadratureError(f"initial-value sweep failed (status {status})")
        out[sel] = rec[sel, 0]
        dout[sel] = rec[sel, 1]
    return out, dout
