"""Compiled inner loops: profile evaluation and the adaptive Rayleigh sweep.

The sweep integrates the Rayleigh system along a polyline in the complex
y-plane.  Waypoints are visited in order; a waypoint may record the state,
branch off on a side trip (state restored afterwards), or spawn the
growing partner solution from the current decaying one.

State layout (complex, length NSTATE):
    0,1  u0, u0'   homogeneous solution carried from the start
    2,3  u1, u1'   homogeneous partner spawned at a reference waypoint with
                   u1 = 0, u1' = 1/u0 (unit Wronskian u1' u0 - u0' u1)
    4,5  p,  p'    particular solution of  p'' = q p + f/(U-c)
    6    Q0        running integral of u0 * f/(U-c) dy
    7    Q1        running integral of u1 * f/(U-c) dy
"""

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

KIND_EXP = 0
KIND_JET = 1
KIND_PARABOLA = 2
KIND_TABULATED = 3
KIND_LINEAR = 4

NSTATE = 8

WP_MOVE = 0
WP_SIDE = 1
WP_SPAWN = 2

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_BUDGET = 2
STATUS_NONFINITE = 3

_NST = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NST, :_NST])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NST])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)


@njit(cache=True)
def _bump(t):
    if t.real <= 0.0:
        return 0.0j, 0.0j, 0.0j
    f = np.exp(-1.0 / t)
    t2 = t * t
    return f, f / t2, f * (1.0 / (t2 * t2) - 2.0 / (t2 * t))


@njit(cache=True)
def _smooth_step(t):
    """1 for t<=0, 0 for t>=1, C-infinity in between; returns S, S', S''."""
    if t.real <= 0.0:
        return 1.0 + 0j, 0j, 0j
    if t.real >= 1.0:
        return 0j, 0j, 0j
    h, h1, h2 = _bump(t)
    g, g1m, g2m = _bump(1.0 - t)
    g1 = -g1m
    g2 = g2m
    s = g + h
    num = g1 * h - g * h1
    den = s * s
    dnum = g2 * h - g * h2
    dden = 2.0 * s * (g1 + h1)
    return g / s, num / den, (dnum * den - num * dden) / (den * den)


@njit(cache=True)
def prof_eval(z, kind, prm, bx, bc):
    """U, U', U'' at complex z."""
    if kind == KIND_EXP:
        e = np.exp(-z)
        up = prm[0]
        return up * (1.0 - e), up * e, -up * e
    if kind == KIND_JET:
        e = np.exp(-z)
        return z * e, (1.0 - z) * e, (z - 2.0) * e
    if kind == KIND_LINEAR:
        return prm[0] * z, prm[0] + 0j, 0j
    if kind == KIND_PARABOLA:
        y0 = prm[0]
        a = prm[1]
        b = prm[2]
        up = prm[3]
        p = (z - y0) * (z - y0) - y0 * y0
        p1 = 2.0 * (z - y0)
        w = b - a
        s, s1, s2 = _smooth_step((z - a) / w)
        s1 = s1 / w
        s2 = s2 / (w * w)
        u = s * p + (1.0 - s) * up
        u1 = s1 * (p - up) + s * p1
        u2 = s2 * (p - up) + 2.0 * s1 * p1 + 2.0 * s
        return u, u1, u2
    # tabulated piecewise polynomial, constant continuation past the table
    m = bx.shape[0] - 1
    xr = z.real
    if xr >= bx[m]:
        deg = bc.shape[0] - 1
        d = bx[m] - bx[m - 1]
        u = 0j
        for k in range(deg + 1):
            u = u * d + bc[k, m - 1]
        return u, 0j, 0j
    i = np.searchsorted(bx, xr, side="right") - 1
    if i < 0:
        i = 0
    if i > m - 1:
        i = m - 1
    s = z - bx[i]
    deg = bc.shape[0] - 1
    u = 0j
    u1 = 0j
    u2 = 0j
    for k in range(deg + 1):
        u2 = u2 * s + 2.0 * u1
        u1 = u1 * s + u
        u = u * s + bc[k, i]
    return u, u1, u2


@njit(cache=True)
def prof_eval_array(y, kind, prm, bx, bc):
    n = y.shape[0]
    out = np.empty((3, n))
    for j in range(n):
        u, u1, u2 = prof_eval(complex(y[j]), kind, prm, bx, bc)
        out[0, j] = u.real
        out[1, j] = u1.real
        out[2, j] = u2.real
    return out


@njit(cache=True)
def forcing_eval(z, fx, fc):
    """Complex cubic piecewise polynomial, zero outside its breakpoints."""
    m = fx.shape[0] - 1
    xr = z.real
    if m < 1 or xr < fx[0] or xr > fx[m]:
        return 0j
    i = np.searchsorted(fx, xr, side="right") - 1
    if i > m - 1:
        i = m - 1
    s = z - fx[i]
    v = 0j
    for k in range(fc.shape[0]):
        v = v * s + fc[k, i]
    return v


@njit(cache=True)
def _rhs(z, dirn, st, c, a2, kind, prm, bx, bc, fx, fc, forced, out):
    u, u1, u2 = prof_eval(z, kind, prm, bx, bc)
    den = u - c
    q = a2 + u2 / den
    out[0] = dirn * st[1]
    out[1] = dirn * q * st[0]
    out[2] = dirn * st[3]
    out[3] = dirn * q * st[2]
    if forced:
        g = forcing_eval(z, fx, fc) / den
        out[4] = dirn * st[5]
        out[5] = dirn * (q * st[4] + g)
        out[6] = dirn * st[0] * g
        out[7] = dirn * st[2] * g
    else:
        for k in range(4, NSTATE):
            out[k] = 0j


@njit(cache=True)
def _segment(z0, z1, st, h, c, a2, kind, prm, bx, bc, fx, fc, forced,
             rtol, atol, hmin, budget):
    """Integrate st in place from z0 to z1.  Returns (h_next, status, steps)."""
    dz = z1 - z0
    length = abs(dz)
    if length == 0.0:
        return h, STATUS_OK, 0
    dirn = dz / length
    K = np.empty((_NST + 1, NSTATE), dtype=np.complex128)
    ytmp = np.empty(NSTATE, dtype=np.complex128)
    ynew = np.empty(NSTATE, dtype=np.complex128)
    f0 = np.empty(NSTATE, dtype=np.complex128)
    sig = 0.0
    steps = 0
    _rhs(z0, dirn, st, c, a2, kind, prm, bx, bc, fx, fc, forced, f0)
    if h <= 0.0 or h > length:
        h = length
    rejected = False
    while sig < length:
        if steps >= budget:
            return h, STATUS_BUDGET, steps
        hs = h
        last = False
        clipped = False
        if sig + hs >= length * (1.0 - 1e-14):
            clipped = length - sig < hs
            hs = length - sig
            last = True
        for k in range(NSTATE):
            K[0, k] = f0[k]
        for s in range(1, _NST):
            for k in range(NSTATE):
                acc = 0j
                for j in range(s):
                    acc += _A[s, j] * K[j, k]
                ytmp[k] = st[k] + hs * acc
            _rhs(z0 + (sig + _C[s] * hs) * dirn, dirn, ytmp, c, a2, kind, prm,
                 bx, bc, fx, fc, forced, K[s])
        for k in range(NSTATE):
            acc = 0j
            for j in range(_NST):
                acc += _B[j] * K[j, k]
            ynew[k] = st[k] + hs * acc
        _rhs(z0 + (sig + hs) * dirn, dirn, ynew, c, a2, kind, prm, bx, bc,
             fx, fc, forced, K[_NST])
        e5 = 0.0
        e3 = 0.0
        for k in range(NSTATE):
            a5 = 0j
            a3 = 0j
            for j in range(_NST + 1):
                a5 += _E5[j] * K[j, k]
                a3 += _E3[j] * K[j, k]
            sc = atol[k] + rtol * max(abs(st[k]), abs(ynew[k]))
            e5 += (abs(a5) / sc) ** 2
            e3 += (abs(a3) / sc) ** 2
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = hs * e5 / np.sqrt((e5 + 0.01 * e3) * NSTATE)
        if not np.isfinite(err):
            err = 1e300
        steps += 1
        if err <= 1.0:
            sig += hs
            for k in range(NSTATE):
                st[k] = ynew[k]
                f0[k] = K[_NST, k]
            if err == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, 0.9 * err ** (-1.0 / 8.0))
            if rejected:
                fac = min(1.0, fac)
            rejected = False
            if not clipped:
                h = hs * fac
            if last:
                break
        else:
            h = hs * max(0.2, 0.9 * err ** (-1.0 / 8.0))
            rejected = True
            if h < hmin:
                return h, STATUS_UNDERFLOW, steps
    for k in range(NSTATE):
        if not (np.isfinite(st[k].real) and np.isfinite(st[k].imag)):
            return h, STATUS_NONFINITE, steps
    return h, STATUS_OK, steps


@njit(cache=True, nogil=True)
def sweep(wp, wtype, widx, z_start, s0, c, alpha, kind, prm, bx, bc, fx, fc,
          forced, rtol, atol, budget, nrec):
    """Follow the waypoint polyline from z_start; returns (records, status, steps).

    atol is a per-component absolute tolerance array of length NSTATE.
    """
    rec = np.zeros((nrec, NSTATE), dtype=np.complex128)
    st = s0.copy()
    side = np.empty(NSTATE, dtype=np.complex128)
    a2 = alpha * alpha
    z = z_start
    h = -1.0
    total = 0
    for w in range(wp.shape[0]):
        target = wp[w]
        kind_w = wtype[w]
        hmin = 1e-15 * (1.0 + abs(target))
        if kind_w == WP_SIDE:
            for k in range(NSTATE):
                side[k] = st[k]
            _, status, n = _segment(z, target, side, h, c, a2, kind, prm, bx,
                                    bc, fx, fc, forced, rtol, atol, hmin,
                                    budget - total)
            total += n
            if status != STATUS_OK:
                return rec, status, total
            if widx[w] >= 0:
                for k in range(NSTATE):
                    rec[widx[w], k] = side[k]
            continue
        h, status, n = _segment(z, target, st, h, c, a2, kind, prm, bx, bc,
                                fx, fc, forced, rtol, atol, hmin, budget - total)
        total += n
        if status != STATUS_OK:
            return rec, status, total
        z = target
        if kind_w == WP_SPAWN:
            st[2] = 0j
            st[3] = 1.0 / st[0]
            st[7] = 0j
        if widx[w] >= 0:
            for k in range(NSTATE):
                rec[widx[w], k] = st[k]
    return rec, STATUS_OK, total
