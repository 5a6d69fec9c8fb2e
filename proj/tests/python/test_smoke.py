import math
from pathlib import Path

import numpy as np
import pytest

import msfsolve

DATA = Path(__file__).resolve().parents[1] / "data"


def test_entropy_density_value():
    assert msfsolve.entropy_density(np.array([1.0, 2.0]), 2.0) == pytest.approx(-3.6931471805599453, rel=1e-14)


def test_potential_round_trip_closes_total():
    rng = np.random.default_rng(7)
    for _ in range(200):
        rho = np.exp(rng.uniform(-8, 1, size=4))
        v = msfsolve.relative_potentials(rho)
        back = msfsolve.densities_from_potentials(v, rho.sum())
        assert np.allclose(back, rho, rtol=1e-12)


def test_group_inverse_identities():
    b = np.array([[0, 1, 2], [1, 0, 0.5], [2, 0.5, 0]], dtype=float)
    rho = np.array([0.2, 0.3, 0.5])
    B = msfsolve.friction_matrix(rho, b)
    G = msfsolve.group_inverse(rho, b)
    assert np.abs(B @ G @ B - B).max() < 1e-10
    assert np.abs(G @ B @ G - G).max() < 1e-10
    assert np.abs(B @ G - G @ B).max() < 1e-10


def test_two_species_closed_form():
    b = np.array([[0, 1], [1, 0]], dtype=float)
    M, soret = msfsolve.onsager_from_friction(np.array([1.0, 2.0]), 1.0, b)
    assert np.allclose(M, (2.0 / 9.0) * np.array([[1, -1], [-1, 1]]), atol=1e-14)
    assert np.allclose(soret, 0.0)
    assert msfsolve.certify_m2(M) == pytest.approx(4.0 / 9.0, rel=1e-12)


def test_degenerate_m3_certificate():
    rho = np.array([0.2, 0.3, 0.5])
    M, _ = msfsolve.matrix_model("degenerate_pirhopi", "c=1", 3, rho, 1.0)
    assert msfsolve.certify_m3(M, rho) == pytest.approx(1.0, rel=1e-10)


def test_simulate_mixing_dissipates_and_conserves():
    cfg = msfsolve.Config.load(str(DATA / "mixing.cfg"))
    cfg.set("time.t_end", "0.01")
    r = msfsolve.simulate(cfg)
    assert r["exit_code"] == 0
    s = np.asarray(r["entropy"])
    assert np.all(np.diff(s) <= 1e-12)
    assert r["max_mass_drift"] < 1e-10
    assert r["rho"].shape == (2, r["x"].size)
    assert r["theta"].min() > 0


def test_unknown_key_raises():
    with pytest.raises(msfsolve.ConfigError):
        msfsolve.Config.parse("time.dt = 0.1\n")


def test_cli_run_writes_outputs(tmp_path):
    code, log = msfsolve.cmd_run(str(DATA / "equilibrium.cfg"), str(tmp_path))
    assert code == 0
    header = (tmp_path / "diagnostics.csv").read_text().splitlines()[0]
    assert header.startswith("t,entropy,entropy_slack,mass_1")
    assert (tmp_path / "fields.csv").read_text().startswith("t,x,rho_1")
    assert (tmp_path / "manifest.json").exists()


def test_check_matrix_zero_matrix_exit():
    code, log = msfsolve.cmd_check_matrix(str(DATA / "zero_matrix.cfg"))
    assert code == 2
    assert "c_M = 0" in log
