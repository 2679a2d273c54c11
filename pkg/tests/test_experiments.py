import math
from dataclasses import replace

import numpy as np
import pytest

from bne.experiments import (ConfigError, SimConfig, ball_radius, config_hash, diagnostics_record, parse_config,
                             preset_relaxation, preset_residual, read_series, read_snapshot, residual_run, setup,
                             write_series, write_snapshot)
from bne.rescaling import classical_frame

SMALL = """
# small 2D Fermi relaxation
dim = 2
n = 16
L = 8
kernel = maxwell2d
M = 4
stats = fermi_r(0.5)
ic = ball_indicator(rho=1, e=1)
dt = 0.25
t_final = 1
snapshot_times = 0, 1
"""


def test_parse_small_config():
    cfg = parse_config(SMALL)
    assert (cfg.dim, cfg.n, cfg.L, cfg.M) == (2, 16, 8.0, 4)
    assert cfg.stats == "fermi" and cfg.r == 0.5 and cfg.hbar is None
    assert cfg.snapshot_times == (0.0, 1.0)
    c = parse_config("dim = 3\nkernel = vhs(0.5, C_phi=2)\nstats = bose(2.5)\n"
                     "ic = quantum_maxwellian(rho=0.2, u=[0, 0, 0.1], sigma=1)\nrescaling = yes")
    assert c.kernel == "vhs" and c.gamma == 0.5 and c.C_phi == 2.0
    assert c.hbar == 2.5 and c.ic_u == (0.0, 0.0, 0.1) and c.rescaling


@pytest.mark.parametrize("text,line,col", [
    ("dim = 2\nfoo = 1", 2, 1),
    ("dim = 2\n  dim = 3", 2, 3),
    ("n = abc", 1, 5),
    ("kernel = warp(1)", 1, 10),
    ("stats = fermi", 1, 9),
    ("dim = 3\nkernel = maxwell2d", 2, 10),
    ("n = 7", 1, 5),
    ("dim = 2\nstats = bose_r(1.05)", 2, 9),
    ("stats = fermi(3)\nic = ball_indicator(rho=1, e=1, sigma=2)", 2, 6),
    ("dt", 1, 1),
])
def test_config_errors_carry_position(text, line, col):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert (exc.value.line, exc.value.col) == (line, col)
    assert f"line {line}, col {col}" in str(exc.value)


def test_hash_ignores_threads_only():
    a = parse_config(SMALL)
    assert config_hash(a) == config_hash(replace(a, threads=8, kernel_cache="x.npz"))
    assert config_hash(a) != config_hash(replace(a, dt=0.1))
    assert len(config_hash(a)) == 16


def test_hbar_resolution_exact_and_discrete():
    cfg = replace(parse_config(SMALL), n=32)
    s = setup(replace(cfg, hbar_moments="exact"))
    # threshold of the exact ball moments rho = e = 1
    assert s.hbar_star == pytest.approx(math.sqrt(4 * math.pi), rel=1e-12)
    assert s.stats.hbar == pytest.approx(0.5 * math.sqrt(4 * math.pi), rel=1e-12)
    d = setup(cfg)
    assert d.hbar_star != s.hbar_star
    assert d.stats.hbar == pytest.approx(0.5 * d.hbar_star)


def test_unresolved_datum_is_a_config_error():
    cfg = replace(parse_config(SMALL), n=4, L=40.0)
    with pytest.raises(ConfigError):
        setup(cfg)


def test_ball_radius_gives_energy():
    assert ball_radius(2, 1.0) == pytest.approx(2.0)
    assert ball_radius(3, 1.5) == pytest.approx(math.sqrt(5.0))


def test_presets():
    c = preset_residual("residual.fd2d.sigma05.L4.ub.norescale")
    assert c.sigma == 0.5 and not c.rescaling and c.u0[0] == pytest.approx(8 / (3 * math.sqrt(2) + 2))
    assert preset_residual("residual.be3d.sigma1.rho02.L4").rho == 0.2
    r = preset_relaxation("relax.be3d.ball.r105")
    assert (r.dim, r.L, r.r, r.stats, r.n) == (3, 6.0, 1.05, "bose", 16)
    assert preset_relaxation("relax.fd2d.maxw.r09", scale="full").n == 128
    for bad in ("residual.xx2d.sigma05.L4", "residual.fd3d.sigma05.L4.ub"):
        with pytest.raises(ConfigError):
            preset_residual(bad)
    with pytest.raises(ConfigError):
        preset_relaxation("relax.be2d.ball.r105")


def test_residual_row_small():
    row = residual_run(preset_residual("residual.fd2d.sigma05.L4", M=4), 16)
    assert row.reference == pytest.approx(7.54518e-04)
    assert 0 < row.residual < 1e-2 and row.T_h > 0 and row.z_h > 1


def test_series_and_snapshot_round_trip(tmp_path):
    s = setup(parse_config(SMALL))
    rec = diagnostics_record(s.state, s)
    rec["bad"] = math.nan
    write_series([rec, rec], tmp_path / "s.ndjson")
    back = read_series(tmp_path / "s.ndjson")
    assert back[0]["rho"] == rec["rho"] and back[1]["bad"] is None
    fr = classical_frame(2, 8.0)
    G = np.random.default_rng(1).random(s.grid.shape) * 1e-3
    write_snapshot(G, fr, tmp_path / "snap.csv", grid=s.grid, config_id=config_hash(s.cfg))
    V, f, meta = read_snapshot(tmp_path / "snap.csv")
    assert V.shape == (256, 2)
    assert np.abs(f - (fr.mu * fr.scale ** 2 * G).ravel()).max() <= 1e-16 * np.abs(f).max()
    assert meta["config_hash"] == config_hash(s.cfg) and meta["grid"]["n"] == 16


def test_simconfig_defaults_validate():
    assert SimConfig(stats="classical").u0().tolist() == [0.0, 0.0]


# documented residual examples, each within a factor of 5 of the quoted value
def _within5(value, ref):
    return ref / 5 <= value <= ref * 5


def test_residual_example_fermi_2d_n64():
    row = residual_run(preset_residual("residual.fd2d.sigma05.L4"), 64)
    assert _within5(row.residual, 2.16212e-09)


def test_residual_example_fermi_3d_n16():
    row = residual_run(preset_residual("residual.fd3d.sigma05.L4", M1=2, M2=2), 16)
    assert _within5(row.residual, 6.65068e-04)


@pytest.mark.xfail(strict=True, reason="2D Bose unrescaled residual is about 1e-3 of the quoted 4.78; "
                                       "see decisions ledger, residual open questions")
def test_residual_example_bose_2d_norescale_n16():
    row = residual_run(preset_residual("residual.be2d.sigma1.L4.norescale"), 16)
    assert _within5(row.residual, 4.77941)
