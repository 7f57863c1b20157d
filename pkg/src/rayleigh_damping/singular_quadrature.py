"""Quadrature rules for pole, logarithmic and (x-b)log(x-b) kernels on a bounded support.

Every integral is the boundary limit eps -> 0+ of an integral against a
kernel evaluated at x - b - i eps, optionally with an oscillating factor
e^{ixt}.  A rule is a linear functional sum_k w_k phi(x_k) whose node set may
contain the singular point itself.

Pole kernels use the split phi(x) = phi(b) + (x - b) psi(x): the smooth part is
integrated by composite Gauss-Legendre panels split at b, and the constant part
has the closed form

    lim int_A^B e^{ist} / (s - i0) ds = i pi + Ci(Bt) - Ci(|A|t) + i (Si(Bt) + Si(|A|t))

(log(B/|A|) + i pi at t = 0).  Logarithmic kernels are integrable, so they are
integrated directly on panels refined geometrically towards b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import sici

from .errors import SupportError

GAUSS_N = 16
MARGIN = 1e-3
GRADE_LEVELS = 40

KINDS = ("plemelj-pole", "principal-value", "log-branch", "oscillatory-pole", "zlogz")


@dataclass(frozen=True, eq=False)
class SingularRule:
    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    location: float
    t: float
    support: tuple

    def apply(self, phi) -> complex:
        return complex(np.dot(self.weights, _values(phi, self.nodes)))


def _values(phi, x):
    if callable(phi):
        return np.asarray(phi(x), dtype=complex)
    return np.asarray(phi, dtype=complex)


def _as_callable(phi, support):
    """(callable, support) from a callable with explicit support or from samples (x, values)."""
    if callable(phi):
        if support is None:
            raise ValueError("a callable phi needs an explicit support (a, b)")
        return phi, (float(support[0]), float(support[1]))
    x, v = phi
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=complex)
    sp = CubicSpline(x, v)
    sup = (float(x[0]), float(x[-1])) if support is None else support
    return sp, (float(sup[0]), float(sup[1]))


def _check(support, b):
    a0, a1 = support
    if not a1 > a0:
        raise SupportError("support must be an interval of positive length")
    m = MARGIN * (a1 - a0)
    if not (a0 + m < b < a1 - m):
        raise SupportError(f"singular point {b:g} is not inside the support [{a0:g}, {a1:g}] "
                           f"with margin {m:.3g}")


def _panels(a, b, width):
    n = max(int(math.ceil((b - a) / width)), 1)
    return np.linspace(a, b, n + 1)


def _gauss_on(edges, n=GAUSS_N):
    gx, gw = np.polynomial.legendre.leggauss(n)
    h = np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + 0.5 * h[:, None] * gx[None, :]).ravel()
    w = (0.5 * h[:, None] * gw[None, :]).ravel()
    return x, w


def _panel_width(support, t):
    w = (support[1] - support[0]) / 32.0
    if t > 0:
        w = min(w, math.pi / t)
    return w


def _graded_edges(support, b, t):
    """Panel edges refined geometrically towards b from both sides."""
    a0, a1 = support
    w = _panel_width(support, t)
    near = min(w, 0.5 * (b - a0), 0.5 * (a1 - b))
    geo = near * 2.0 ** -np.arange(GRADE_LEVELS)
    left = np.concatenate([_panels(a0, b - near, w), (b - geo)[1:], [b]])
    right = np.concatenate([(b + geo)[::-1][:-1], _panels(b + near, a1, w)])
    return np.unique(np.concatenate([left, right]))


def _pole_constant(A, B, t):
    """lim_{eps->0+} int_A^B e^{ist} / (s - i eps) ds with A < 0 < B."""
    if t == 0:
        return complex(math.log(B / -A), math.pi)
    sgn = 1.0 if t > 0 else -1.0
    at = abs(t)
    siB, ciB = sici(B * at)
    siA, ciA = sici(-A * at)
    return complex(ciB - ciA, math.pi + sgn * (siB + siA))


def pole_rule(support, pole: float, t: float = 0.0, *, kind: str = "oscillatory-pole",
              n: int = GAUSS_N) -> SingularRule:
    """Rule for lim int phi(x) e^{ixt} / (x - pole - i0) dx over the support."""
    _check(support, pole)
    a0, a1 = support
    w = _panel_width(support, t)
    edges = np.unique(np.concatenate([_panels(a0, pole, w), _panels(pole, a1, w)]))
    x, wq = _gauss_on(edges, n)
    k = wq * np.exp(1j * x * t) / (x - pole)
    c = np.exp(1j * pole * t) * _pole_constant(a0 - pole, a1 - pole, t)
    nodes = np.concatenate([x, [pole]])
    weights = np.concatenate([k, [c - k.sum()]])
    return SingularRule(kind, nodes, weights, float(pole), float(t), (a0, a1))


def plemelj_integral(phi, pole: float, support=None) -> complex:
    """i pi phi(pole) + PV int phi(x) / (x - pole) dx."""
    f, sup = _as_callable(phi, support)
    return pole_rule(sup, pole, 0.0, kind="plemelj-pole").apply(f)


def principal_value(phi, pole: float, support=None) -> complex:
    """PV int phi(x) / (x - pole) dx."""
    f, sup = _as_callable(phi, support)
    return plemelj_integral(f, pole, sup) - 1j * math.pi * complex(_values(f, np.array([pole]))[0])


def oscillatory_pole_integral(phi, pole: float, t: float, support=None) -> complex:
    """lim_{eps->0+} int phi(x) e^{ixt} / (x - pole - i eps) dx."""
    if t < 0:
        raise ValueError("t must be non-negative")
    f, sup = _as_callable(phi, support)
    return pole_rule(sup, pole, t).apply(f)


def oscillatory_pole_remainder(phi, pole: float, t: float, support=None) -> complex:
    """oscillatory_pole_integral minus its leading term 2 i pi phi(pole) e^{i pole t}."""
    f, sup = _as_callable(phi, support)
    lead = 2j * math.pi * complex(_values(f, np.array([pole]))[0]) * np.exp(1j * pole * t)
    return oscillatory_pole_integral(f, pole, t, sup) - lead


def _branch_rule(support, b, t, kind, n=GAUSS_N):
    _check(support, b)
    x, wq = _gauss_on(_graded_edges(support, b, t), n)
    s = x - b
    log = np.log(np.abs(s)) - 1j * math.pi * (s < 0)
    ker = log if kind == "log-branch" else s * log
    return SingularRule(kind, x, wq * ker * np.exp(1j * x * t), float(b), float(t), support)


def log_branch_rule(support, branch_point: float, t: float = 0.0) -> SingularRule:
    return _branch_rule(support, branch_point, t, "log-branch")


def log_branch_integral(phi, branch_point: float, t: float, support=None) -> complex:
    """lim_{eps->0+} int phi(x) e^{ixt} log(x - b - i eps) dx."""
    if t < 0:
        raise ValueError("t must be non-negative")
    f, sup = _as_callable(phi, support)
    return log_branch_rule(sup, branch_point, t).apply(f)


def zlogz_integral(phi, branch_point: float, t: float, support=None) -> complex:
    """lim_{eps->0+} int phi(x) e^{ixt} (x - b - i eps) log(x - b - i eps) dx."""
    if t < 0:
        raise ValueError("t must be non-negative")
    f, sup = _as_callable(phi, support)
    return _branch_rule(sup, branch_point, t, "zlogz").apply(f)


__all__ = ["SingularRule", "pole_rule", "plemelj_integral", "principal_value",
           "oscillatory_pole_integral", "oscillatory_pole_remainder", "log_branch_rule",
           "log_branch_integral", "zlogz_integral"]
