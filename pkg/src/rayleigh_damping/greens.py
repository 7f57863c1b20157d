"""Green's function of the Rayleigh operator with the boundary condition psi(0) = 0.

For (U-c)(psi''-alpha^2 psi) - U'' psi = f and the unit-Wronskian pair
(psi_-, psi_+), the solution vanishing at the wall and decaying at infinity is
psi(y) = int_0^inf G(x, y) f(x) dx with

    G^int(x, y) = -psi_-(max(x, y)) psi_+(min(x, y)) / (U(x) - c)
    G^b(x, y)   = +(psi_+(0) / psi_-(0)) psi_-(x) psi_-(y) / (U(x) - c)

G^int alone decays at infinity; G^b restores G(x, 0) = 0.  The y-derivative of
G jumps by +1/(U(y) - c) across x = y.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import EigenvalueError, PoleError
from .profile import ShearProfile
from .rayleigh_solver import RTOL, Forcing, SpectralParams, SweepResult, default_grid, sweep
from .spectrum import TOL_EIG, dispersion_scale

KERNEL_GRID = 2000


@dataclass(frozen=True, eq=False)
class GreensKernel:
    """G(x, y) sampled on xgrid x ygrid; arrays are indexed [ix, iy]."""

    params: SpectralParams
    xgrid: np.ndarray
    ygrid: np.ndarray
    g_int: np.ndarray
    g_b: np.ndarray
    profile: ShearProfile
    psi_minus_x: np.ndarray
    psi_plus_x: np.ndarray
    psi_minus_y: np.ndarray
    psi_plus_y: np.ndarray
    D: complex
    psi_plus0: complex

    @property
    def g(self) -> np.ndarray:
        return self.g_int + self.g_b

    def jump(self) -> np.ndarray:
        """Jump of d/dy G across x = y at each y node: +1/(U(y) - c)."""
        u = self.profile.us(self.ygrid)
        return 1.0 / (u - self.params.c)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# version={__version__}\n")
            fh.write(f"# alpha={self.params.alpha!r} c={self.params.c!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "re_gint", "im_gint", "re_gb", "im_gb"])
            for i, x in enumerate(self.xgrid):
                for j, y in enumerate(self.ygrid):
                    a, b = self.g_int[i, j], self.g_b[i, j]
                    w.writerow([repr(float(x)), repr(float(y)), repr(a.real), repr(a.imag),
                                repr(b.real), repr(b.imag)])


def _check_not_eigenvalue(profile, alpha, D, tol_eig):
    scale = dispersion_scale(profile, alpha)
    if abs(D) < tol_eig * scale:
        raise EigenvalueError(f"|D| = {abs(D):.3g} below {tol_eig:g} x scale: c is an eigenvalue")


def assemble_greens(profile: ShearProfile, params: SpectralParams, xgrid=None, ygrid=None, *,
                    tol_eig: float = TOL_EIG, cap: int = KERNEL_GRID) -> GreensKernel:
    """Sample G^int and G^b; grids default to the graded solver mesh capped at `cap` nodes."""
    c = params.c
    if xgrid is None:
        xgrid = default_grid(profile, c)
        if xgrid.size > cap:
            xgrid = xgrid[np.unique(np.linspace(0, xgrid.size - 1, cap).round().astype(int))]
    xgrid = np.asarray(xgrid, dtype=float)
    ygrid = xgrid if ygrid is None else np.asarray(ygrid, dtype=float)
    nodes = np.concatenate([xgrid, ygrid])
    r = sweep(profile, params.alpha, c, nodes, partner=True)
    _check_not_eigenvalue(profile, params.alpha, r.D, tol_eig)
    nx = xgrid.size
    mx, px = r.u0[:nx], r.u1[:nx]
    my, py = r.u0[nx:nx + ygrid.size], r.u1[nx:nx + ygrid.size]
    den = profile.us(xgrid) - c
    if np.any(np.abs(den) <= 1e-14 * profile.scale()):
        raise PoleError("a kernel node x lies on the critical layer U(x) = c")
    below = xgrid[:, None] <= ygrid[None, :]          # x <= y
    g_int = -np.where(below, my[None, :] * px[:, None], mx[:, None] * py[None, :]) / den[:, None]
    kappa = r.psi_plus0 / r.D
    g_b = kappa * mx[:, None] * my[None, :] / den[:, None]
    return GreensKernel(params, xgrid, ygrid, g_int, g_b, profile, mx, px, my, py,
                        r.D, r.psi_plus0)


@dataclass(frozen=True, eq=False)
class GreensResponse:
    """psi = int G f dx on the output grid, split into interior and boundary parts."""

    y: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    psi_int: np.ndarray
    dpsi_int: np.ndarray
    psi_b: np.ndarray
    dpsi_b: np.ndarray
    sweep: SweepResult


def apply_greens_at(profile: ShearProfile, alpha: float, c: complex, forcing: Forcing, y,
                    *, tol_eig: float | None = TOL_EIG, rtol: float = RTOL,
                    continued: bool = False) -> GreensResponse:
    """Resolvent applied to a forcing, evaluated at the nodes y.

    The x-integrals are carried as running integrals along the same complex
    integration path as the homogeneous solutions, so the 1/(U(x)-c)
    singularity at real c is integrated with the Im c -> 0+ prescription.
    """
    y = np.asarray(y, dtype=float)
    r = sweep(profile, alpha, c, y, forcing=forcing, partner=True, rtol=rtol,
              continued=continued)
    if tol_eig is not None:
        _check_not_eigenvalue(profile, alpha, r.D, tol_eig)
    pi, dpi, pb, dpb = r.resolvent()
    n = y.size
    return GreensResponse(y, pi[:n] + pb[:n], dpi[:n] + dpb[:n], pi[:n], dpi[:n], pb[:n],
                          dpb[:n], r)


def apply_greens(kernel: GreensKernel, forcing) -> np.ndarray:
    """psi on kernel.ygrid for a forcing sampled on kernel.xgrid (or a Forcing)."""
    if not isinstance(forcing, Forcing):
        forcing = Forcing(kernel.xgrid, forcing)
    if forcing.zero:
        return np.zeros(kernel.ygrid.size, dtype=complex)
    res = apply_greens_at(kernel.profile, kernel.params.alpha, kernel.params.c, forcing,
                          kernel.ygrid, tol_eig=None)
    return res.psi


def apply_kernel_quadrature(kernel: GreensKernel, fvals) -> np.ndarray:
    """Trapezoidal quadrature of the sampled kernel; only meaningful for Im c well above 0."""
    f = np.asarray(fvals, dtype=complex)
    w = np.zeros(kernel.xgrid.size)
    dx = np.diff(kernel.xgrid)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return (w * f) @ kernel.g
