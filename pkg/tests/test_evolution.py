import numpy as np
import pytest

from rayleigh_damping.errors import ContourEigenvalueError, StepError, ValidationError
from rayleigh_damping.evolution import (InitialData, build_contour, evolve_contour,
                                        evolve_direct, split_modes)
from rayleigh_damping.spectrum import SpectrumReport, spectrum_report

Y = np.linspace(0, 6, 121)


@pytest.fixture(scope="module")
def jet_report(jet_profile):
    return spectrum_report(jet_profile, 0.25)


def rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_initial_reconstruction(exp_profile):
    data = InitialData.gaussian(1.0, 1.0, 0.3)
    f = evolve_contour(exp_profile, data, [0.0, 5.0], y=Y)
    assert rel(f.omega[0], data.omega_at(Y)) < 1e-4
    assert rel(f.psi[0], data.psi0(Y)[0]) < 1e-4


def test_linear_contour_matches_direct(linear_profile):
    data = InitialData.gaussian(1.0, 1.0, 0.3, y_max=15.0, n=3001)
    times = [1.0, 5.0, 10.0]
    fc = evolve_contour(linear_profile, data, times, y=Y)
    fd = evolve_direct(linear_profile, data, times, 0.02, y=Y, y_max=15.0)
    for k in range(3):
        assert rel(fc.omega[k], fd.omega[k]) < 1e-3
        assert rel(fc.psi[k], fd.psi[k]) < 1e-3


def test_exp_has_no_modes(exp_profile):
    data = InitialData.gaussian(1.0, 1.0, 0.3)
    rep = SpectrumReport(alpha=1.0, continuous_range=(0.0, 1.0))
    f = evolve_contour(exp_profile, data, [2.0], y=Y, report=rep)
    assert f.modes == []
    assert np.array_equal(f.decay_psi, f.psi)


def test_direct_exact_transport(linear_profile):
    data = InitialData.gaussian(1.0, 1.0, 0.3, y_max=15.0, n=3001)
    f = evolve_direct(linear_profile, data, [0.0, 3.0, 6.0], 0.02, y=Y, y_max=15.0)
    for k, t in enumerate(f.times):
        ref = data.omega_at(Y) * np.exp(-1j * Y * t)
        assert np.max(np.abs(f.omega[k] - ref)) < 1e-6
        assert np.max(np.abs(np.abs(f.omega[k]) - np.abs(f.omega[0]))) < 1e-8


def test_direct_time_step_convergence(jet_profile):
    data = InitialData.gaussian(1.0, 1.0, 0.3)
    a = evolve_direct(jet_profile, data, [10.0], 0.1, y=Y, y_max=15.0)
    b = evolve_direct(jet_profile, data, [10.0], 0.05, y=Y, y_max=15.0)
    c = evolve_direct(jet_profile, data, [10.0], 0.025, y=Y, y_max=15.0)
    e1, e2 = np.max(np.abs(a.psi - b.psi)), np.max(np.abs(b.psi - c.psi))
    assert e2 < e1 / 8
    assert e2 < 1e-6 * np.max(np.abs(c.psi))


def test_step_bound(linear_profile):
    data = InitialData.gaussian(1.0, 1.0, 0.3, y_max=15.0, n=3001)
    with pytest.raises(StepError):
        evolve_direct(linear_profile, data, [1.0], 0.05, y_max=15.0)


def test_wall_condition_and_vorticity_relation(exp_profile):
    data = InitialData.gaussian(1.0, 1.0, 0.3)
    y = np.linspace(0, 5, 1001)
    f = evolve_contour(exp_profile, data, [4.0], y=y)
    d = evolve_direct(exp_profile, data, [4.0], 0.05, y=y, y_max=20.0)
    assert abs(f.psi[0, 0]) < 1e-10 and abs(d.psi[0, 0]) < 1e-12
    h = y[1] - y[0]
    lap = (f.psi[0, 2:] - 2 * f.psi[0, 1:-1] + f.psi[0, :-2]) / h ** 2 - f.psi[0, 1:-1]
    assert rel(-lap, f.omega[0, 1:-1]) < 1e-3


def test_planted_growth_matches_direct(jet_profile, jet_report):
    data = InitialData.gaussian(0.25, 1.0, 0.3)
    times = [10.0, 20.0]
    fc = evolve_contour(jet_profile, data, times, y=Y, report=jet_report)
    fd = evolve_direct(jet_profile, data, times, 0.05, y=Y, y_max=25.0)
    assert len(fc.modes) == 1 and fc.modes[0].kind == "unstable"
    for k in range(2):
        assert rel(fc.psi[k], fd.psi[k]) < 1e-4
    mp, _, _ = fc.modes_field()
    g = np.max(np.abs(mp[1])) / np.max(np.abs(mp[0]))
    c0 = fc.modes[0].c
    assert g == pytest.approx(np.exp(0.25 * c0.imag * 10), rel=1e-12)


def test_split_modes_superposition(exp_profile):
    # a synthetic embedded entry: full = modes + decay holds exactly
    data = InitialData.gaussian(1.0, 1.0, 0.3)
    f = evolve_contour(exp_profile, data, [1.0, 2.0], y=Y)
    rep = SpectrumReport(alpha=1.0, embedded=[(0.3, True)])
    g = split_modes(f, rep, exp_profile, data)
    mp, md, mo = g.modes_field()
    assert len(g.modes) == 1 and g.modes[0].kind == "embedded"
    assert np.allclose(g.decay_psi + mp, f.psi, rtol=0, atol=1e-14)
    assert np.allclose(g.decay_dpsi + md, f.dpsi, rtol=0, atol=1e-14)


def test_contour_eigenvalue_error(jet_profile, jet_report):
    data = InitialData.gaussian(0.25, 1.0, 0.3)
    with pytest.raises(ContourEigenvalueError):
        evolve_contour(jet_profile, data, [5.0], y=Y, report=jet_report, eps=0.028)


def test_initial_data_validation():
    y = np.linspace(0, 10, 101)
    with pytest.raises(ValidationError):
        InitialData(1.0, y, np.ones(101))
    with pytest.raises(ValidationError):
        InitialData(0.0, y, np.exp(-y * y))
    with pytest.raises(ValidationError):
        InitialData(1.0, y + 1, np.exp(-y * y))
    assert InitialData(1.0, y, np.zeros(101)).is_zero


def test_zero_data(exp_profile):
    data = InitialData(1.0, np.linspace(0, 10, 101), np.zeros(101))
    f = evolve_contour(exp_profile, data, [1.0], y=Y)
    assert not np.any(f.psi) and not np.any(f.omega)


def test_csv_layout(tmp_path, exp_profile):
    data = InitialData.gaussian(1.0, 1.0, 0.3)
    f = evolve_contour(exp_profile, data, [1.0, 2.0], y=Y[:11])
    f.to_csv(tmp_path / "f.csv")
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[2] == "t,y,re_psi,im_psi,re_dpsi,im_dpsi,re_omega,im_omega,part"
    assert len(lines) == 3 + 3 * 2 * 11


def test_threads_deterministic(tmp_path, exp_profile):
    data = InitialData.gaussian(1.0, 1.0, 0.3)
    a = evolve_contour(exp_profile, data, [3.0], y=Y, threads=1)
    b = evolve_contour(exp_profile, data, [3.0], y=Y, threads=3)
    assert np.array_equal(a.psi, b.psi) and np.array_equal(a.omega, b.omega)


def test_contour_geometry(exp_profile):
    c = build_contour(exp_profile, 1.0, 50.0)
    assert c.eps == pytest.approx(min(5e-2, 1 / 50))
    lo, hi = c.segment
    assert lo < 0 and hi > 1
    assert np.all(c.nodes[np.abs(c.nodes.imag - c.eps) < 1e-14].real >= lo - 1e-12)
