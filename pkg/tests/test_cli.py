import json
import subprocess
import sys
from pathlib import Path

import pytest

from rayleigh_damping import cli
from rayleigh_damping.errors import ConfigError
from rayleigh_damping.evolution import THREADS_ENV

GOLDEN = Path(__file__).parent / "golden"


def run(tmp_path, command, text, *extra):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    out = tmp_path / "out"
    return cli.main([command, "--config", str(cfg), "--out", str(out), *extra]), out


def test_unknown_and_missing_keys(tmp_path):
    code, _ = run(tmp_path, "spectrum", "profile.kind = builtin-exp\nalpha = 1\nfoo = 2\n")
    assert code == 1
    code, _ = run(tmp_path, "spectrum", "profile.kind = builtin-exp\n")
    assert code == 1
    with pytest.raises(ConfigError):
        cli.parse_config("alpha = 1\nalpha = 2\nprofile.kind = builtin-exp\n")


def test_box_below_floor(tmp_path):
    code, _ = run(tmp_path, "spectrum",
                  "profile.kind = builtin-exp\nalpha = 1\nspectrum.box = 0, 1, 0, 1\n")
    assert code == 1


@pytest.mark.parametrize("name", ["spectrum_exp", "spectrum_jet"])
def test_golden_spectrum(tmp_path, name):
    code, out = run(tmp_path, "spectrum", (GOLDEN / f"{name}.cfg").read_text())
    assert code == 0
    got = json.loads((out / "spectrum.json").read_text())
    ref = json.loads((GOLDEN / f"{name}.json").read_text())
    assert got.keys() == ref.keys()
    assert got["flags"] == ref["flags"] and got["embedded"] == ref["embedded"]
    assert len(got["discrete"]) == len(ref["discrete"])
    for a, b in zip(got["discrete"], ref["discrete"]):
        for k in a:
            assert a[k] == pytest.approx(b[k], abs=1e-9)


def test_evolve_both(tmp_path):
    code, out = run(tmp_path, "evolve",
                    "profile.kind = builtin-linear-window\nalpha = 1\nnumerics.y_max = 15\n"
                    "evolve.method = both\nevolve.times = 1, 4\nevolve.dt = 0.02\n"
                    "numerics.n_scan = 100\noutput.y_max = 6\noutput.n = 61\ndata.n = 3001\n")
    assert code == 0
    cmp = json.loads((out / "comparison.json").read_text())
    assert cmp["max_rel_diff_omega"] < 1e-3 and cmp["max_rel_diff_psi"] < 1e-3
    assert (out / "field_contour.csv").exists() and (out / "field_direct.csv").exists()


def test_evolve_empty_times(tmp_path):
    code, _ = run(tmp_path, "evolve", "profile.kind = builtin-exp\nalpha = 1\nevolve.times = \n")
    assert code == 1


def test_planted_contour_error(tmp_path):
    code, _ = run(tmp_path, "evolve",
                  "profile.kind = builtin-jet\nalpha = 0.25\nevolve.times = 5\n"
                  "evolve.eps = 0.028\nnumerics.n_scan = 100\noutput.n = 21\n")
    assert code == 3


def test_depletion_jet(tmp_path):
    code, out = run(tmp_path, "depletion",
                    "profile.kind = builtin-jet\nalpha = 1\ndata.center = 0.7\n"
                    "data.width = 0.4\noutput.y_max = 4\noutput.n = 41\n")
    assert code == 0
    d = json.loads((out / "depletion.json").read_text())
    (diag,) = d["diagnostics"]
    assert 1.8 <= diag["fit_exponent"] <= 2.2
    assert (out / "depletion.csv").exists()


def test_depletion_monotone_and_zero(tmp_path):
    code, out = run(tmp_path, "depletion",
                    "profile.kind = builtin-exp\nalpha = 1\noutput.n = 21\n")
    assert code == 0
    assert json.loads((out / "depletion.json").read_text())["diagnostics"] == []
    code, out = run(tmp_path, "depletion",
                    "profile.kind = builtin-jet\nalpha = 1\ndata.kind = zero\noutput.n = 21\n")
    assert code == 0
    assert json.loads((out / "depletion.json").read_text())["max_abs_omega_inf"] == 0.0


def test_decayfit_validation(tmp_path):
    code, _ = run(tmp_path, "decayfit",
                  "profile.kind = builtin-exp\nalpha = 1\ndecayfit.n_times = 4\n")
    assert code == 1


def test_threads_cap(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "2")
    assert cli.resolve_threads(8) == 2
    assert cli.resolve_threads(None) == 2
    monkeypatch.delenv(THREADS_ENV)
    assert cli.resolve_threads(None) == 1
    assert cli.resolve_threads(3) == 3


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "rayleigh_damping", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
