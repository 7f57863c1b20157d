"""Acceptance criteria; each prints one PASS/FAIL line.

Run with pytest, or directly: python tests/test_acceptance.py
"""

import filecmp
import math
import subprocess
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from rayleigh_damping import rayleigh_solver as R  # noqa: E402
from rayleigh_damping import singular_quadrature as Q  # noqa: E402
from rayleigh_damping.depletion import (compute_omega_inf, extract_omega_inf, fit_decay,  # noqa: E402
                                        remainder_norms, theta)
from rayleigh_damping.evolution import InitialData, evolve_contour, evolve_direct  # noqa: E402
from rayleigh_damping.profile import ProfileSpec, build_profile  # noqa: E402
from rayleigh_damping.spectrum import spectrum_report  # noqa: E402

try:
    import conftest
    LINES = conftest.ACCEPTANCE_LINES
except ImportError:  # pragma: no cover
    LINES = []

BUILTINS = ("builtin-exp", "builtin-jet", "builtin-parabola-window", "builtin-linear-window")
JET_TIMES = np.array([25.0, 50.0, 100.0, 150.0, 200.0])


def report(n, ok, text):
    line = f"C{n:02d} {'PASS' if ok else 'FAIL'}: {text}"
    LINES.append((n, line))
    print(line)
    assert ok, line


@lru_cache(maxsize=None)
def profile(kind):
    return build_profile(ProfileSpec(kind, {}))


def slope(x, y):
    return float(np.polyfit(np.log(x), np.log(np.abs(y)), 1)[0])


def rel(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


# ----------------------------------------------------------------------------


def test_c01_parabola_closed_form():
    t0 = time.perf_counter()
    p = profile("builtin-parabola-window")
    y = np.linspace(0.1, 1.9, 20)
    worst = 0.0
    # U = (y-1)^2 - 1 on the window, so U - c = z^2 - (c + 1) with z = y - 1
    for cr in np.linspace(-0.9, 0.8, 20):
        c = cr + 0.05j
        b = R.solve_basis(p, R.SpectralParams(0.0, c), y)
        ex = R.explicit_psi2_parabola(y - 1.0, c + 1.0)
        A = np.stack([b.psi_minus.psi, b.psi_plus.psi], 1)
        coef, *_ = np.linalg.lstsq(A, ex, rcond=None)
        worst = max(worst, rel(A @ coef, ex))
    dt = time.perf_counter() - t0
    report(1, worst < 1e-6 and dt < 10,
           f"parabola psi_2 vs closed form, 20 c x 20 y: max rel err {worst:.2e} (<1e-6), "
           f"{dt:.1f} s (<10 s)")


def test_c02_trivial_profile():
    p = profile("builtin-linear-window")
    y = np.linspace(0, 20, 401)
    worst = 0.0
    for a in (0.3, 1.0, 2.5):
        for c in (0.5 + 0.5j, 3.0 + 0.01j, -1.0 + 1.0j):
            m = R.solve_minus(p, R.SpectralParams(a, c), y)
            worst = max(worst, float(np.max(np.abs(m.psi / np.exp(-a * y) - 1))))
    report(2, worst < 1e-8, f"U''=0 window psi_- = e^(-alpha y): max rel err {worst:.2e} (<1e-8)")


def test_c03_wronskian():
    rng = np.random.default_rng(3)
    y = np.linspace(0, 10, 201)
    worst, n = 0.0, 0
    for kind in BUILTINS:
        p = profile(kind)
        lo, hi = p.velocity_range()
        if not math.isfinite(hi):
            hi = 5.0
        ce = [e.c_extr for e in p.extremal_layers]
        k = 0
        while k < 20:
            a = rng.uniform(0.2, 2.0)
            c = complex(rng.uniform(lo, hi), rng.uniform(0.01, 0.5))
            if any(abs(c - e) < 1e-3 for e in ce):
                continue
            w = R.solve_basis(p, R.SpectralParams(a, c), y).wronskian_profile()
            worst = max(worst, float(np.max(np.abs(w - w[0]) / np.abs(w[0]))))
            k += 1
            n += 1
    report(3, worst < 1e-6, f"Wronskian constancy over {n} samples: max rel var {worst:.2e} (<1e-6)")


def test_c04_localization():
    t0 = time.perf_counter()
    p = profile("builtin-jet")
    e = p.extremal_layers[0]
    ss = np.geomspace(1e-2, 1e-4, 5)
    y0 = 0.5
    m, pl, band = [], [], []
    for s in ss:
        c = e.c_extr + 1j * s
        r = R.sweep(p, 1.0, c, np.array([y0]))
        m.append(abs(r.u0[0]))
        pl.append(abs(r.u1[0]))
        band.append(abs(R.sweep(p, 1.0, c, np.array([e.y_extr - 0.5 * math.sqrt(s)])).u0[0]))
    sm, sp, sb = slope(ss, m), slope(ss, pl), slope(ss, band)
    dt = time.perf_counter() - t0
    ok = abs(sm + 1.5) <= 0.1 and abs(sp - 1.5) <= 0.1 and abs(sb + 0.5) <= 0.15 and dt < 120
    report(4, ok, f"jet localization: psi_- {sm:.3f} (-1.5+-0.1), psi_+ {sp:.3f} (+1.5+-0.1), "
                  f"overlap band {sb:.3f} (-0.5+-0.15), {dt:.1f} s (<120 s)")


def test_c05_local_wronskian():
    p = profile("builtin-jet")
    e = p.extremal_layers[0]
    ss = np.geomspace(1e-2, 1e-4, 5)
    w = [abs(R.extremal_local_pair(p, 0, 1.0, e.c_extr + 1j * s).wronskian) for s in ss]
    k = slope(ss, w)
    report(5, abs(k + 1.5) <= 0.1, f"local pair Wronskian exponent {k:.3f} (-1.5+-0.1)")


def _poly3(x):
    x = np.asarray(x, dtype=float)
    return np.clip(1 - x * x, 0, None) ** 3 * (1 + 0.3 * x)


def _bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(-1 / (1 - x[m] ** 2))
    return out


def test_c06_plemelj():
    from scipy.integrate import quad
    sup = (-1.0, 1.0)
    e_bump = abs(Q.plemelj_integral(_bump, 0.0, sup) - 1j * math.pi * math.exp(-1))

    f = lambda x: np.exp(x) * np.cos(2 * x)
    p = 0.3

    def eps_int(eps):
        k = lambda x: f(x) / complex(x - p, -eps)
        pts = [p - 10 * eps, p - eps, p, p + eps, p + 10 * eps]
        return complex(quad(lambda x: k(x).real, -1, 1, points=pts, limit=400, epsabs=1e-14)[0],
                       quad(lambda x: k(x).imag, -1, 1, points=pts, limit=400, epsabs=1e-14)[0])
    es = np.array([1e-2, 1e-3, 1e-4])
    A = np.stack([np.ones(3), es, es * es], 1)
    lim = np.linalg.solve(A, np.array([eps_int(x) for x in es]))[0]
    e_lim = abs(Q.plemelj_integral(f, p, sup) - lim)

    ts = np.geomspace(10, 100, 8)
    s1 = slope(ts, [Q.oscillatory_pole_remainder(_poly3, 0.0, t, sup) for t in ts])
    s3 = slope(ts, [Q.zlogz_integral(_poly3, 0.0, t, sup) for t in ts])
    # the leading term carries a minus sign: -(2 pi / t) phi(0)
    r2 = max(abs(Q.log_branch_integral(_poly3, 0.0, t, sup) / (-2 * math.pi / t) - 1)
             for t in (20.0, 40.0))
    ok = e_bump < 1e-8 and e_lim < 1e-6 and s1 <= -1.8 and s3 <= -1.8 and r2 < 0.1
    report(6, ok, f"Plemelj suite: bump err {e_bump:.1e} (<1e-8), eps-limit err {e_lim:.1e} "
                  f"(<1e-6), ple1 slope {s1:.2f}, ple3 slope {s3:.2f} (<=-1.8), "
                  f"ple2 lead rel dev {r2:.3f} (<0.1)")


def test_c07_contour_vs_direct():
    t0 = time.perf_counter()
    times = [5.0, 20.0, 50.0]
    y = np.linspace(0, 6, 121)
    worst = {}
    for kind in ("builtin-exp", "builtin-linear-window"):
        p = profile(kind)
        for a in (0.5, 1.0):
            if kind == "builtin-exp":
                ym, dt = 30.0, 0.05
            else:
                ym = 30.0 if a == 0.5 else 15.0
                dt = 0.02
            data = InitialData.gaussian(a, 1.0, 0.3, y_max=ym, n=int(ym / 0.005) + 1)
            fc = evolve_contour(p, data, times, y=y)
            fd = evolve_direct(p, data, times, dt, y=y, y_max=ym)
            worst[(kind, a)] = max(rel(fc.omega[k], fd.omega[k]) for k in range(len(times)))
    dt = time.perf_counter() - t0
    m = max(worst.values())
    detail = ", ".join(f"{k[0].split('-')[1]} a={k[1]}: {v:.1e}" for k, v in worst.items())
    report(7, m < 1e-3 and dt < 300,
           f"contour vs direct omega, t<=50: max rel diff {m:.1e} (<1e-3) [{detail}], "
           f"{dt:.0f} s (<300 s)")


def test_c08_decay_exponents():
    p = profile("builtin-exp")
    a = 3.0
    data = InitialData.gaussian(a, 0.7, 0.2)
    rep = spectrum_report(p, a)
    times = np.geomspace(20, 200, 8)
    fld = evolve_contour(p, data, times, y=np.linspace(0, 4, 161), report=rep)
    w = (20.0, 200.0)
    e_psi = fit_decay(fld, "psi", w, r2_min=0.0).exponent
    e_dpsi = fit_decay(fld, "dpsi", w, r2_min=0.0).exponent
    e_int = fit_decay(fld, "psi_int", w, r2_min=0.0).exponent
    oks = (abs(e_psi + 1) <= 0.15, abs(e_dpsi + 1) <= 0.15, abs(e_int + 2) <= 0.2)
    report(8, all(oks),
           f"exp decay exponents: psi {e_psi:.3f} (-1+-0.15) {'ok' if oks[0] else 'miss'}, "
           f"dpsi {e_dpsi:.3f} (-1+-0.15) {'ok' if oks[1] else 'miss'}, "
           f"interior psi {e_int:.3f} (-2+-0.2) {'ok' if oks[2] else 'miss'}")


JET_Y = np.union1d(np.linspace(0, 3, 121), 1.0 + np.array([-1e-2, -1e-3, 1e-3, 1e-2]))


@lru_cache(maxsize=None)
def jet_case():
    p = profile("builtin-jet")
    data = InitialData.gaussian(1.0, 0.7, 0.4)
    return p, data, compute_omega_inf(p, data, JET_Y)


@lru_cache(maxsize=None)
def jet_field():
    p, data, _ = jet_case()
    rep = spectrum_report(p, 1.0)
    return evolve_contour(p, data, JET_TIMES, y=JET_Y, report=rep)


def test_c09_depletion():
    p, data, dep = jet_case()
    (d,) = dep.extremal
    ratio, k = d["relative_to_max"], d["exponent"]
    long = np.arange(150.0, 200.0 + 1e-9, 0.5)
    fd = evolve_direct(p, data, long, 0.05, y=JET_Y, y_max=25.0)
    ext = extract_omega_inf(fd, p, (150.0, 200.0))
    err = rel(ext, dep.omega_inf)
    ok = ratio < 1e-3 and 1.8 <= k <= 2.2 and err < 5e-2
    report(9, ok, f"jet depletion: |omega_inf(y_extr)|/max {ratio:.1e} (<1e-3), local exponent "
                  f"{k:.3f} ([1.8,2.2]), formula vs direct extraction rel err {err:.3f} (<5e-2)")


def test_c10_theta_bounded():
    p, _, _ = jet_case()
    f = jet_field()
    th = theta(JET_Y - p.extremal_layers[0].y_extr)
    q = np.max(np.abs(f.decay_psi) / th[None, :], axis=1) * np.sqrt(1 + (f.alpha * f.times) ** 2)
    growth = float(q.max() / q[0])
    ok = bool(np.all(np.isfinite(q))) and growth <= 2.0
    report(10, ok, "jet |psi_decay| <alpha t>/Theta over t=25..200: "
                   + ", ".join(f"{v:.3g}" for v in q) + f"; max/first {growth:.2f} (<=2)")


def test_c11_remainder_monotone():
    p, _, dep = jet_case()
    f = jet_field()
    r = remainder_norms(f, p, dep.omega_inf)
    sel = [list(JET_TIMES).index(t) for t in (25.0, 50.0, 100.0, 200.0)]
    r = r[sel]
    ok = bool(np.all(r[1:] <= 1.1 * r[:-1]))
    report(11, ok, "Theta-normalized omega remainder at t=25,50,100,200: "
                   + ", ".join(f"{v:.3g}" for v in r) + " (nonincreasing within 10%)")


CFG = """profile.kind = builtin-jet
alpha = 0.5
evolve.times = 1, 3
numerics.n_scan = 200
output.n = 41
output.y_max = 4
"""


def test_c12_determinism(tmp_path=None):
    import tempfile
    base = Path(tmp_path) if tmp_path is not None else Path(tempfile.mkdtemp())
    (base / "run.cfg").write_text(CFG)
    outs = []
    for k in (1, 2):
        out = base / f"run{k}"
        for cmd in ("spectrum", "evolve"):
            subprocess.run([sys.executable, "-m", "rayleigh_damping", cmd, "--config",
                            str(base / "run.cfg"), "--out", str(out)], check=True)
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    same = names == sorted(p.name for p in outs[1].iterdir()) and all(
        filecmp.cmp(outs[0] / n, outs[1] / n, shallow=False) for n in names)
    report(12, same, f"two CLI runs give byte-identical outputs ({', '.join(names)})")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
