"""Time evolution of one Fourier mode of the linearized Euler equations.

Convention: velocity (d_y psi, -d_x psi) e^{i alpha x}, vorticity
omega = -(d_y^2 - alpha^2) psi, so that

    d_t omega = -i alpha U omega - i alpha U'' psi,   psi(0) = 0.

Contour method.  With lambda = -i alpha c the resolvent solves the Rayleigh
equation with forcing i omega0 / alpha, and

    psi(t) = (alpha / 2 pi) int_Gamma e^{-i alpha c t} psi_c dc

along a contour running left to right above every singularity of psi_c
that is not accounted for separately.  Gamma is a horizontal segment at
height eps over the velocity range joined to two rays that descend into the
lower half plane outside the range, where psi_c continues analytically.
The 1/c tail of psi_c is removed by subtracting s_c = i psi0 / (alpha (c - c0))
with c0 = -iK below Gamma, whose transform is psi0 e^{-alpha K t} exactly.
Unstable eigenvalues above Gamma contribute residues.

Direct method.  Integrating-factor RK4 in w = e^{i alpha U t} omega with a
fourth-order compact (Numerov) elliptic solve on a uniform grid.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from . import __version__
from .errors import ContourEigenvalueError, StepError, ValidationError
from .greens import apply_greens_at
from .profile import ShearProfile
from .rayleigh_solver import Forcing, reference_point
from .spectrum import SpectrumReport, dispersion

THREADS_ENV = "RAYLEIGH_DAMPING_THREADS"
PANEL = 8
RAY_PANEL = 16
K_SUB = 1.0


def default_threads() -> int:
    v = os.environ.get(THREADS_ENV)
    try:
        return max(1, int(v)) if v else 1
    except ValueError:
        return 1


def _cumint(y, g):
    return (cumulative_simpson(g.real, x=y, initial=0.0)
            + 1j * cumulative_simpson(g.imag, x=y, initial=0.0))


@dataclass(frozen=True, eq=False)
class InitialData:
    """Fourier-transformed initial vorticity omega0 sampled on y (starting at 0)."""

    alpha: float
    y: np.ndarray
    omega0: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        w = np.asarray(self.omega0, dtype=complex)
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValidationError("alpha must be positive for the evolution problem")
        if y.ndim != 1 or y.shape != w.shape or y.size < 8:
            raise ValidationError("omega0 needs matching 1-D samples (at least 8)")
        if y[0] != 0.0 or np.any(np.diff(y) <= 0):
            raise ValidationError("omega0 grid must start at 0 and increase strictly")
        if not np.all(np.isfinite(w)):
            raise ValidationError("omega0 must be finite")
        mag = np.abs(w)
        tail = mag[y >= 0.8 * y[-1]]
        if mag.max() > 0 and tail.max() > 1e-8 * mag.max():
            raise ValidationError("omega0 does not decay: |omega0| on the last 20% of the grid "
                                  "exceeds 1e-8 of its maximum")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "omega0", w)

    @classmethod
    def gaussian(cls, alpha, center, width, *, y_max=30.0, n=6001, amplitude=1.0):
        y = np.linspace(0.0, y_max, n)
        return cls(alpha, y, amplitude * np.exp(-((y - center) / width) ** 2))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.omega0)

    def forcing(self) -> Forcing:
        return Forcing(self.y, 1j * self.omega0 / self.alpha)

    def omega_at(self, y):
        sp = CubicSpline(self.y, self.omega0)
        out = sp(np.asarray(y, dtype=float))
        out[np.asarray(y) > self.y[-1]] = 0.0
        return out

    def psi0(self, y):
        """Stream function of omega0: psi0 = -(d^2 - alpha^2)^{-1} omega0 with psi0(0) = 0."""
        a, x, w = self.alpha, self.y, self.omega0
        L = _cumint(x, np.sinh(a * x) * w)
        T = _cumint(x, np.exp(-a * x) * w)
        R = T[-1] - T
        p = (np.exp(-a * x) * L + np.sinh(a * x) * R) / a
        dp = -np.exp(-a * x) * L + np.cosh(a * x) * R
        y = np.asarray(y, dtype=float)
        return CubicSpline(x, p)(y), CubicSpline(x, dp)(y)

    def boundary_tail(self, profile: ShearProfile):
        """Leading 1/c coefficient of the boundary part of the resolvent, per unit e^{-alpha y}."""
        a = self.alpha
        yr = reference_point(profile)
        kappa = math.exp(a * yr) * math.sinh(-a * yr) / a
        I = _cumint(self.y, np.exp(-a * self.y) * 1j * self.omega0 / a)[-1]
        return -kappa * I


@dataclass(frozen=True)
class ContourSpec:
    """Quadrature nodes and weights (dc included) on the deformed contour."""

    eps: float
    A: float            # half-width of the horizontal segment
    center: float
    nodes: np.ndarray
    weights: np.ndarray
    spacing: float      # largest node gap on the horizontal segment
    K: float = K_SUB

    @property
    def segment(self):
        return self.center - self.A, self.center + self.A


def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def build_contour(profile: ShearProfile, alpha: float, t_max: float, *, eps: float | None = None,
                  margin: float | None = None, panel: int = PANEL) -> ContourSpec:
    """Contour for all output times up to t_max."""
    lo, hi = profile.velocity_range()
    W = max(hi - lo, 1e-12)
    at = alpha * max(t_max, 1e-12)
    if eps is None:
        eps = min(5e-2, 1.0 / at)
    if not eps > 0:
        raise ValueError("contour height eps must be positive")
    h = min(2.0 * eps, 2.0 * math.pi / (3.0 * at))
    if margin is None:
        margin = max(0.1 * W, 4.0 * h)
    a, b = lo - margin, hi + margin
    npan = max(int(math.ceil((b - a) / h)), 1)
    edges = np.linspace(a, b, npan + 1)
    gx, gw = _gauss(panel)
    seg = (edges[:-1, None] + np.diff(edges)[:, None] * gx[None, :]).ravel()
    segw = (np.diff(edges)[:, None] * gw[None, :]).ravel()
    nodes = [seg + 1j * eps]
    weights = [segw.astype(complex)]
    # rays: geometric panels then a mapped tail to infinity
    s0 = min(0.05, 0.1 / at)
    L = 4.0
    pe = [0.0, s0]
    while pe[-1] < L:
        pe.append(min(2.0 * pe[-1], L))
    pe = np.array(pe)
    rx, rw = _gauss(RAY_PANEL)
    s = (pe[:-1, None] + np.diff(pe)[:, None] * rx[None, :]).ravel()
    sw = (np.diff(pe)[:, None] * rw[None, :]).ravel()
    tx, tw = _gauss(24)
    s = np.concatenate([s, L / tx])
    sw = np.concatenate([sw, L * tw / tx ** 2])
    for sgn, start in ((-1.0, a), (1.0, b)):
        d = complex(sgn, -1.0)
        nodes.append(start + 1j * eps + d * s)
        # left ray runs towards the segment (reversed orientation)
        weights.append(d * sw * (1.0 if sgn > 0 else -1.0))
    return ContourSpec(eps=eps, A=0.5 * (b - a), center=0.5 * (a + b),
                       nodes=np.concatenate(nodes), weights=np.concatenate(weights),
                       spacing=float(np.max(np.diff(seg))) if seg.size > 1 else h)


@dataclass(frozen=True, eq=False)
class Mode:
    """Residue term amp(y) e^{-i alpha c t}."""

    c: complex
    kind: str           # "unstable" or "embedded"
    psi: np.ndarray
    dpsi: np.ndarray
    omega: np.ndarray

    def at(self, alpha, t):
        f = np.exp(-1j * alpha * self.c * np.asarray(t, dtype=float))[:, None]
        return f * self.psi[None, :], f * self.dpsi[None, :], f * self.omega[None, :]


@dataclass(frozen=True, eq=False)
class EvolutionField:
    times: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    omega: np.ndarray
    alpha: float
    method: str
    modes: list = field(default_factory=list)
    decay_psi: np.ndarray | None = None
    decay_dpsi: np.ndarray | None = None
    decay_omega: np.ndarray | None = None
    parts: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.decay_psi is None:
            object.__setattr__(self, "decay_psi", self.psi)
            object.__setattr__(self, "decay_dpsi", self.dpsi)
            object.__setattr__(self, "decay_omega", self.omega)

    def modes_field(self):
        z = np.zeros_like(self.psi)
        p, d, o = z.copy(), z.copy(), z.copy()
        for m in self.modes:
            a, b, c = m.at(self.alpha, self.times)
            p += a
            d += b
            o += c
        return p, d, o

    def to_csv(self, path) -> None:
        mp, md, mo = self.modes_field()
        parts = [("full", self.psi, self.dpsi, self.omega), ("modes", mp, md, mo),
                 ("decay", self.decay_psi, self.decay_dpsi, self.decay_omega)]
        with open(path, "w", newline="") as fh:
            fh.write(f"# version={__version__}\n")
            fh.write(f"# alpha={self.alpha!r} method={self.method}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "y", "re_psi", "im_psi", "re_dpsi", "im_dpsi", "re_omega",
                        "im_omega", "part"])
            for name, P, Dp, O in parts:
                for i, t in enumerate(self.times):
                    for j, y in enumerate(self.y):
                        w.writerow([repr(float(t)), repr(float(y)), repr(P[i, j].real),
                                    repr(P[i, j].imag), repr(Dp[i, j].real), repr(Dp[i, j].imag),
                                    repr(O[i, j].real), repr(O[i, j].imag), name])


# ----------------------------------------------------------------------------
# modes


def mode_amplitude(profile: ShearProfile, data: InitialData, c0: complex, dD: complex, y,
                   kind: str) -> Mode:
    """Residue of (alpha/2pi) e^{-i alpha c t} psi_c at an eigenvalue c0 (clockwise)."""
    a = data.alpha
    y = np.asarray(y, dtype=float)
    r = apply_greens_at(profile, a, c0, data.forcing(), y, tol_eig=None).sweep
    n = y.size
    coef = -1j * a * r.psi_plus0 * r.B0 / dD
    psi = coef * r.u0[:n]
    dpsi = coef * r.du0[:n]
    u, _, u2 = profile.derivs(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        om = -u2 * psi / (u - c0)
    return Mode(complex(c0), kind, psi, dpsi, om)


def _modes_from_report(profile, data, report, y, eps=None):
    out = []
    for c0, res in report.discrete:
        if eps is None or c0.imag > eps:
            out.append(mode_amplitude(profile, data, c0, 1.0 / res, y, "unstable"))
    for c0, _ in report.embedded:
        dD = dispersion(profile, data.alpha, c0).dvalue
        out.append(mode_amplitude(profile, data, complex(c0), dD, y, "embedded"))
    return out


def split_modes(field: EvolutionField, report: SpectrumReport, profile: ShearProfile,
                data: InitialData) -> EvolutionField:
    """Attach every unstable and embedded mode and subtract them from the field."""
    modes = _modes_from_report(profile, data, report, field.y)
    f2 = replace(field, modes=modes)
    mp, md, mo = f2.modes_field()
    return replace(f2, decay_psi=field.psi - mp, decay_dpsi=field.dpsi - md,
                   decay_omega=field.omega - mo)


# ----------------------------------------------------------------------------
# contour evolution


def _check_contour(report, contour):
    if report is None:
        return
    a, b = contour.segment
    for c0, _ in report.discrete:
        dx = max(a - c0.real, 0.0, c0.real - b)
        dist = math.hypot(dx, c0.imag - contour.eps)
        if dist <= 2.0 * contour.spacing or c0.imag <= contour.eps:
            raise ContourEigenvalueError(
                f"eigenvalue {c0:.6g} lies within {dist:.3g} of the contour at height "
                f"{contour.eps:g}; choose eps below {0.5 * c0.imag:.3g}")


def evolve_contour(profile: ShearProfile, data: InitialData, times, *,
                   contour: ContourSpec | None = None, report: SpectrumReport | None = None,
                   y=None, threads: int | None = None, eps: float | None = None) -> EvolutionField:
    """psi, d_y psi and omega at the given times by contour inversion of the resolvent."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D list")
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    a = data.alpha
    y = np.linspace(0.0, min(10.0, profile.y_max), 201) if y is None else np.asarray(y, float)
    if contour is None:
        if eps is None and report is not None and report.discrete:
            # keep the segment well below every unstable eigenvalue
            at = a * max(float(times.max()), 1e-12)
            eps = min(5e-2, 1.0 / at, 0.25 * min(c.imag for c, _ in report.discrete))
        contour = build_contour(profile, a, float(times.max()), eps=eps)
    _check_contour(report, contour)
    threads = default_threads() if threads is None else max(1, int(threads))
    u, _, u2 = profile.derivs(y)
    F = data.forcing()
    psi0, dpsi0 = data.psi0(y)
    beta_b = data.boundary_tail(profile) * np.exp(-a * y)
    dbeta_b = -a * beta_b
    c0 = -1j * contour.K
    nt, ny = times.size, y.size

    def node(c):
        if F.zero:
            z = np.zeros(ny, dtype=complex)
            return z, z, z, z
        r = apply_greens_at(profile, a, c, F, y, tol_eig=None, continued=c.imag < 0)
        return r.psi, r.dpsi, r.psi_int, r.dpsi_int

    cs = contour.nodes
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            res = list(ex.map(node, cs))
    else:
        res = [node(c) for c in cs]
    P = np.array([r[0] for r in res])
    DP = np.array([r[1] for r in res])
    PI = np.array([r[2] for r in res])
    DPI = np.array([r[3] for r in res])
    inv = 1.0 / (cs - c0)
    s_full = (1j / a) * inv[:, None] * psi0[None, :]
    ds_full = (1j / a) * inv[:, None] * dpsi0[None, :]
    s_b = inv[:, None] * beta_b[None, :]
    ds_b = inv[:, None] * dbeta_b[None, :]
    PB, DPB = P - PI, DP - DPI
    Om = P / (u[None, :] - cs[:, None])

    E = np.exp(-1j * a * np.outer(times, cs)) * (a / (2 * math.pi)) * contour.weights[None, :]
    dec = np.exp(-a * contour.K * times)[:, None]
    psi = E @ (P - s_full) + dec * psi0[None, :]
    dpsi = E @ (DP - ds_full) + dec * dpsi0[None, :]
    psi_b = E @ (PB - s_b) + dec * beta_b[None, :]
    dpsi_b = E @ (DPB - ds_b) + dec * dbeta_b[None, :]
    omega = (data.omega_at(y)[None, :] * np.exp(-1j * a * np.outer(times, u))
             - u2[None, :] * (E @ Om))

    unstable = []
    if report is not None:
        unstable = [m for m in _modes_from_report(profile, data, report, y, contour.eps)
                    if m.kind == "unstable"]
    for m in unstable:
        mp, md, mo = m.at(a, times)
        psi, dpsi, omega = psi + mp, dpsi + md, omega + mo
        psi_b, dpsi_b = psi_b + mp, dpsi_b + md
    parts = {"psi_int": psi - psi_b, "dpsi_int": dpsi - dpsi_b, "psi_b": psi_b,
             "dpsi_b": dpsi_b, "n_nodes": int(cs.size), "eps": contour.eps}
    fld = EvolutionField(times, y, psi, dpsi, omega, a, "contour", parts=parts)
    if report is not None:
        fld = split_modes(fld, report, profile, data)
    return fld


# ----------------------------------------------------------------------------
# direct stepper


class _Elliptic:
    """Numerov solve of psi'' - alpha^2 psi = -omega, psi(0)=0, decaying far-field closure."""

    def __init__(self, alpha, h, n):
        self.a, self.h, self.n = alpha, h, n
        k = h * h / 12.0
        a2 = alpha * alpha
        m = n - 1                                # unknowns psi_1 .. psi_{n-1}
        off = (1.0 - k * a2) * np.ones(m - 1)
        main = (-2.0 - 10.0 * k * a2) * np.ones(m)
        # psi_n = e^{-alpha h} psi_{n-1} folds into the last row
        self.r = math.exp(-alpha * h)
        main[-1] += (1.0 - k * a2) * self.r
        A = diags([off, main, off], [-1, 0, 1], format="csc")
        self.lu = splu(A)
        self.k = k

    def solve(self, om):
        k = self.k
        rhs = -k * (om[2:] + 10.0 * om[1:-1] + om[:-2])
        re = self.lu.solve(np.ascontiguousarray(rhs.real))
        im = self.lu.solve(np.ascontiguousarray(rhs.imag))
        psi = np.zeros(self.n + 1, dtype=complex)
        psi[1:-1] = re + 1j * im
        psi[-1] = self.r * psi[-2]
        return psi


def _derivative(psi, h):
    d = np.empty_like(psi)
    d[2:-2] = (psi[:-4] - 8 * psi[1:-3] + 8 * psi[3:-1] - psi[4:]) / (12 * h)
    d[0] = (-25 * psi[0] + 48 * psi[1] - 36 * psi[2] + 16 * psi[3] - 3 * psi[4]) / (12 * h)
    d[1] = (-3 * psi[0] - 10 * psi[1] + 18 * psi[2] - 6 * psi[3] + psi[4]) / (12 * h)
    d[-2] = -(-3 * psi[-1] - 10 * psi[-2] + 18 * psi[-3] - 6 * psi[-4] + psi[-5]) / (12 * h)
    d[-1] = -(-25 * psi[-1] + 48 * psi[-2] - 36 * psi[-3] + 16 * psi[-4] - 3 * psi[-5]) / (12 * h)
    return d


def evolve_direct(profile: ShearProfile, data: InitialData, times, dt: float, *, y=None,
                  h: float = 0.005, y_max: float | None = None,
                  callback=None) -> EvolutionField:
    """Integrating-factor RK4 for the vorticity with a compact elliptic solve."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D list")
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be non-negative and sorted")
    a = data.alpha
    Y = profile.y_max if y_max is None else float(y_max)
    Y = min(Y, profile.y_max)
    n = int(round(Y / h))
    grid = np.linspace(0.0, n * h, n + 1)
    u, _, u2 = profile.derivs(grid)
    umax = float(np.max(np.abs(u)))
    bound = 0.5 / (a * max(umax, 1e-300))
    if not (dt > 0) or dt > bound:
        raise StepError(f"dt={dt:g} violates the bound dt <= 0.5/(alpha max|U|) = {bound:.4g}")
    ell = _Elliptic(a, h, n)
    w = data.omega_at(grid).astype(complex)
    yo = np.linspace(0.0, min(10.0, Y), 201) if y is None else np.asarray(y, float)

    def rhs(t, w):
        ph = np.exp(-1j * a * u * t)
        psi = ell.solve(ph * w)
        return -1j * a * u2 * psi / ph

    out_p, out_d, out_o = [], [], []
    t = 0.0

    def record(t, w):
        om = np.exp(-1j * a * u * t) * w
        psi = ell.solve(om)
        dpsi = _derivative(psi, h)
        out_p.append(CubicSpline(grid, psi)(yo))
        out_d.append(CubicSpline(grid, dpsi)(yo))
        out_o.append(CubicSpline(grid, om)(yo))
        if callback is not None:
            callback(t, grid, om)

    for tk in times:
        span = tk - t
        if span > 0:
            m = int(math.ceil(span / dt - 1e-12))
            d = span / m
            for _ in range(m):
                k1 = rhs(t, w)
                k2 = rhs(t + 0.5 * d, w + 0.5 * d * k1)
                k3 = rhs(t + 0.5 * d, w + 0.5 * d * k2)
                k4 = rhs(t + d, w + d * k3)
                w = w + (d / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                t += d
            t = tk
        record(t, w)
    return EvolutionField(times, yo, np.array(out_p), np.array(out_d), np.array(out_o), a,
                          "direct", parts={"h": h, "dt": dt})
