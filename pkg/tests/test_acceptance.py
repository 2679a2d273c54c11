"""Acceptance suite: one PASS/FAIL line per criterion at the stated tolerances.

Criteria that the package does not meet are marked ``xfail(strict=True)``
with the reason recorded in the decisions ledger; they still print a line.
Long relaxation runs are shared between criteria through module fixtures.
"""

import time

import numpy as np
import pytest

from bne.collision import CollisionWorkspace, assemble_Q, collision_pieces, direct_pieces
from bne.diagnostics import moments
from bne.experiments import (initial_frame, initial_values, preset_relaxation, preset_residual, residual_run,
                             run_config)
from bne.grid import build_grid, ifft_c
from bne.integrate import euler_step, init_state
from bne.kernels import (QuadratureError, beta_reference, build_hardsphere3d, build_maxwell2d,
                         build_maxwell2d_symmetric, hardsphere3d_params, maxwell2d_params)
from bne.quantum import (BOSE, FERMI, MU_SOMMERFELD, ParticleStatistics, _fermi_quad_mu, _fermi_sommerfeld_mu,
                         bose_integral, fermi_integral, hbar_star, solve_from_mass_temperature, zeta)
from bne.rescaling import classical_frame, to_rescaled, velocity_nodes

LEDGER = "see decisions ledger"


# ---------------------------------------------------------------- 1. fugacities

FUGACITY = [
    (FERMI, 2, 1.0, 0.5, 16.5454, 2e-3), (FERMI, 2, 1.0, 1.0, 3.1887, 2e-3),
    (BOSE, 2, 1.0, 0.5, 0.943, 1e-3), (BOSE, 2, 1.0, 1.0, 0.7613, 1e-3),
    (FERMI, 3, 1.0, 0.5, 24.3228, 1e-2), (FERMI, 3, 1.0, 1.0, 3.09922, 1e-3),
    (BOSE, 3, 0.5, 0.5, 0.99706, 5e-4), (BOSE, 3, 0.5, 1.0, 0.63071, 1e-3),
    (BOSE, 3, 0.2, 0.5, 0.68499, 1e-3), (BOSE, 3, 0.2, 1.0, 0.30354, 1e-3),
]


def test_1_fugacity_solves(report):
    t0 = time.perf_counter()
    errs = [abs(solve_from_mass_temperature(ParticleStatistics(k, 3.0, d), rho, T).z - z) / tol
            for k, d, rho, T, z, tol in FUGACITY]
    sec = time.perf_counter() - t0
    ok = max(errs) <= 1 and sec < 1
    assert report("1", ok, f"10 fugacities, worst error {max(errs):.2f} x tolerance, {sec:.3f} s")


# ---------------------------------------------------------------- 2. thresholds

def _ball_moments_3d(n, L):
    cfg = preset_relaxation("relax.be3d.ball.r1", n=n, L=L)
    g = build_grid(3, n, L)
    fr = initial_frame(cfg)
    m = moments(to_rescaled(initial_values(cfg, velocity_nodes(g, fr)), fr, g).phys, fr, g)
    return m["rho"], m["e"]


def test_2a_threshold_fermi_2d(report):
    h = hbar_star(FERMI, 2, 1.0, 1.0)
    assert report("2(a)", abs(h - 3.5449) <= 1e-3, f"hbar*(2D Fermi, rho=1, e=1) = {h:.6f} (target 3.5449)")


def test_2b_threshold_fermi_3d(report):
    h = hbar_star(FERMI, 3, 1.0, 1.5)
    assert report("2(b)", abs(h - 3.60452) <= 1e-3, f"hbar*(3D Fermi, rho=1, e=1.5) = {h:.6f} (target 3.60452)")


@pytest.mark.xfail(strict=True, reason=f"3.97285 is 1.01 x the ball threshold 3.93351; {LEDGER}")
def test_2c_threshold_bose_3d_ball(report):
    exact = hbar_star(BOSE, 3, 1.0, 1.0)
    sampled = hbar_star(BOSE, 3, *_ball_moments_3d(32, 6.0))
    ok = abs(exact - 3.97285) <= 1e-3 or abs(sampled - 3.97285) <= 1e-3
    assert report("2(c)", ok, f"hbar*(3D Bose ball) = {exact:.6f} exact moments, {sampled:.6f} on 32^3 "
                              f"[-6,6]^3 (target 3.97285)")


def test_2d_threshold_bose_3d_maxwellian(report):
    h = hbar_star(BOSE, 3, 1.0, 1.5)
    assert report("2(d)", abs(h - 4.81755) <= 1e-3, f"hbar*(3D Bose Maxwellian) = {h:.6f} (target 4.81755)")


# ---------------------------------------------------------------- 3. spectral accuracy


def _band(value, ref):
    return ref / 5 <= value <= ref * 5


@pytest.fixture(scope="module")
def residuals_2d():
    t0 = time.perf_counter()
    out = {}
    for cid in ("residual.fd2d.sigma05.L4", "residual.fd2d.sigma05.L4.norescale"):
        case = preset_residual(cid)
        out[cid] = {n: residual_run(case, n) for n in (16, 32, 64)}
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def residuals_3d():
    t0 = time.perf_counter()
    case = preset_residual("residual.fd3d.sigma05.L4", M1=2, M2=2)
    rows = {n: residual_run(case, n) for n in (16, 32)}
    return rows, time.perf_counter() - t0


def _describe(rows):
    return ", ".join(f"n={n}: {r.residual:.3e} (ref {r.reference:.3e})" for n, r in rows.items())


def _monotone(rows):
    v = [rows[n].residual for n in sorted(rows)]
    return all(b < a for a, b in zip(v, v[1:]))


def test_3a_residual_2d_rescaled(report, residuals_2d):
    rows = residuals_2d[0]["residual.fd2d.sigma05.L4"]
    ok = all(_band(r.residual, r.reference) for r in rows.values()) and _monotone(rows)
    assert report("3(a)", ok, f"2D Fermi rescaled, {_describe(rows)}, monotone {_monotone(rows)}")


@pytest.mark.xfail(strict=True, reason=f"fixed-frame n=16 residual is far below the quoted value; {LEDGER}")
def test_3b_residual_2d_fixed_frame_n16(report, residuals_2d):
    r = residuals_2d[0]["residual.fd2d.sigma05.L4.norescale"][16]
    assert report("3(b)", _band(r.residual, 2.40e-2), f"2D Fermi fixed frame n=16: {r.residual:.3e} (ref 2.40e-02)")


def test_3c_residual_2d_fixed_frame_n64_and_decay(report, residuals_2d):
    rows, sec = residuals_2d
    fixed = rows["residual.fd2d.sigma05.L4.norescale"]
    ok = _band(fixed[64].residual, 6.57e-8) and _monotone(fixed) and sec < 120
    assert report("3(c)", ok, f"2D Fermi fixed frame n=64: {fixed[64].residual:.3e} (ref 6.57e-08), "
                              f"monotone {_monotone(fixed)}, 2D suite {sec:.1f} s")


def test_3d_residual_3d_rescaled(report, residuals_3d):
    rows, sec = residuals_3d
    ok = all(_band(r.residual, r.reference) for r in rows.values()) and _monotone(rows) and sec < 900
    assert report("3(d)", ok, f"3D Fermi rescaled M1=M2=2, {_describe(rows)}, monotone {_monotone(rows)}, "
                              f"{sec:.0f} s on one thread")


# ---------------------------------------------------------------- 4. oracle


def test_4_oracle_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for table in (build_maxwell2d(build_grid(2, 8, 4.0), 4), build_hardsphere3d(build_grid(3, 8, 4.0), 2, 2)):
        ws = CollisionWorkspace(table)
        fields = rng.random((20,) + table.grid.shape)
        ref = direct_pieces(table, fields, fields, fields)
        for i in range(20):
            fast = collision_pieces(ws, fields[i])
            for name, coeffs in ref.items():
                b = ifft_c(coeffs[i])
                worst = max(worst, float(np.abs(fast[name] - b).max() / np.abs(b).max()))
    sec = time.perf_counter() - t0
    assert report("4", worst <= 1e-11 and sec < 60,
                  f"6 pieces x 20 fields in 2D and 3D, worst relative {worst:.2e}, {sec:.1f} s")


# ---------------------------------------------------------------- 5. kernel modes


def _beta_ref(grid, params, k, l):
    try:
        return beta_reference(grid, params, k, l, quad_order=24)
    except QuadratureError:
        return beta_reference(grid, params, k, l, quad_order=48)


def test_5_kernel_modes(report):
    rng = np.random.default_rng(5)
    g2, g3 = build_grid(2, 8, 4.0), build_grid(3, 8, 4.0)
    t2 = build_maxwell2d(g2, 64, nyquist="exact")
    t3 = build_hardsphere3d(g3, 32, 32, theta_rule="gauss", nyquist="exact")
    e2 = e3 = 0.0
    for _ in range(50):
        k, l = rng.integers(-4, 4, 2), rng.integers(-4, 4, 2)
        ref = _beta_ref(g2, maxwell2d_params(), k, l)
        e2 = max(e2, abs(t2.beta(k, l) - ref) / abs(ref))
        k, l = rng.integers(-4, 4, 3), rng.integers(-4, 4, 3)
        ref = _beta_ref(g3, hardsphere3d_params(), k, l)
        e3 = max(e3, abs(t3.beta(k, l) - ref) / abs(ref))
    g = build_grid(2, 16, 4.0)
    sym, plain = build_maxwell2d_symmetric(g, 4), build_maxwell2d(g, 8)
    es = float(np.abs(sym.beta_diag - plain.beta_diag).max() / np.abs(plain.beta_diag).max())
    G = rng.random(g.shape)
    qs, qp = (assemble_Q(CollisionWorkspace(t, alpha_eff=0.5), G=G) for t in (sym, plain))
    es = max(es, float(np.abs(qs - qp).max() / np.abs(qp).max()))
    ok = e2 <= 1e-8 and e3 <= 1e-8 and es <= 1e-12
    assert report("5", ok, f"beta vs quadrature 2D M=64 {e2:.1e}, 3D M1=M2=32 {e3:.1e}; "
                           f"symmetric vs plain rule {es:.1e}")


# ---------------------------------------------------------------- 6. conservation


def test_6_conservation(report):
    g = build_grid(2, 32, 6.0)
    table = build_maxwell2d(g, 8)
    fr = classical_frame(2, 6.0)
    V = velocity_nodes(g, fr)
    f = 0.04 * np.exp(-((V[0] - 0.5) ** 2 + 0.6 * V[1] ** 2)) + 0.03 * np.exp(-((V[0] + 0.6) ** 2 + (V[1] - 0.3) ** 2))
    stats = ParticleStatistics(FERMI, 3.0, 2)
    s = init_state(to_rescaled(f, fr, g), fr, stats, table, 0.05)
    Q = assemble_Q(CollisionWorkspace(table, alpha_eff=stats.alpha()), G=s.G)
    l1 = np.abs(Q).sum()
    one = max(abs(np.sum(w * Q)) / l1 for w in (np.ones(g.shape), V[0], V[1], V[0] ** 2 + V[1] ** 2))
    m0 = np.concatenate([[s.rho], s.mom, [s.energy]])
    for _ in range(100):
        s = euler_step(s)
    m1 = np.concatenate([[s.rho], s.mom, [s.energy]])
    drift = float(np.abs(m1 - m0).max() / np.abs(m0).max())
    assert report("6", one <= 1e-8 and drift <= 1e-7,
                  f"one evaluation {one:.1e} of ||Q||_1, 100 Euler steps drift {drift:.1e}")


# ---------------------------------------------------------------- 7. relaxation


def _run(preset, **kw):
    t0 = time.perf_counter()
    s, rec = run_config(preset_relaxation(preset, **kw), snapshot=False)
    return s, rec, time.perf_counter() - t0


@pytest.fixture(scope="module")
def fermi_2d_ball_r05():
    return _run("relax.fd2d.ball.r05")


def test_7a_l1_relaxation(report, fermi_2d_ball_r05):
    s, rec, sec = fermi_2d_ball_r05
    err = [x["relax_err"] for x in rec.series]
    ratio = err[0] / err[-1]
    ok = rec.status == "completed" and rec.series[-1]["t"] >= 30 - 1e-9 and ratio >= 10 and sec < 600
    assert report("7(a) l1", ok, f"2D Fermi ball r=0.5, ||f_h - f_inf||_1 {err[0]:.3e} -> {err[-1]:.3e} "
                                 f"(x{ratio:.0f}) over [0, 30], {sec:.0f} s")


@pytest.mark.xfail(strict=True, reason=f"Gibbs oscillations of the discontinuous datum raise the entropy "
                                       f"by about 1e-4 late in the run; {LEDGER}")
def test_7a_entropy(report, fermi_2d_ball_r05):
    s, rec, sec = fermi_2d_ball_r05
    H = np.array([x["entropy"] for x in rec.series], dtype=float)
    rise = float(np.nanmax(np.diff(H)))
    ok = np.all(np.isfinite(H)) and rise <= 1e-6
    assert report("7(a) entropy", ok, f"2D Fermi ball r=0.5, largest entropy increase {rise:.2e} (allowed 1e-6)")


def test_7b_blowup(report):
    s, rec, sec = _run("relax.fd2d.ball.r105")
    ok = rec.status == "blowup" and rec.blowup_time is not None and sec < 600
    assert report("7(b)", ok, f"2D Fermi ball r=1.05, status {rec.status} at t = {rec.blowup_time}, {sec:.0f} s")


@pytest.mark.xfail(strict=True, reason=f"16^3 grid loses the condensing peak near t = 0.26; {LEDGER}")
def test_7c_bose_condensation(report):
    s, rec, sec = _run("relax.be3d.ball.r105")
    mf = np.array([x["max_f"] for x in rec.series])
    peak = int(np.argmax(mf))
    ok = bool(np.all(np.diff(mf) > 0)) and sec < 1800
    assert report("7(c)", ok, f"3D Bose ball r=1.05, max f {mf[0]:.3f} -> peak {mf[peak]:.3f} at "
                              f"t = {rec.series[peak]['t']:.3f} -> {mf[-1]:.3f} at t = {rec.series[-1]['t']:.2f}, "
                              f"{sec:.0f} s")


def test_7d_relaxation_without_entropy(report):
    s, rec, sec = _run("relax.fd2d.maxw.r09")
    t = np.array([x["t"] for x in rec.series])
    err = np.array([x["relax_err"] for x in rec.series])
    after = t >= 1.0
    ok = (not rec.series[0]["entropy_defined"] and bool(np.all(np.diff(err[after]) < 0))
          and rec.status == "completed" and sec < 1800)
    assert report("7(d)", ok, f"2D Fermi Maxwellian r=0.9, entropy defined at t=0: "
                              f"{rec.series[0]['entropy_defined']}, relaxation error {err[0]:.3e} -> "
                              f"{err[-1]:.3e}, monotone for t >= 1, {sec:.0f} s")


# ---------------------------------------------------------------- 8. special functions


def test_8_special_functions(report):
    rng = np.random.default_rng(8)
    z = rng.uniform(0.0, 50.0, 1000)
    e1 = float(np.max(np.abs(fermi_integral(1.0, z) - np.log1p(z)) / np.maximum(np.log1p(z), 1.0)))
    zb = rng.uniform(0.0, 0.999999, 1000)
    e2 = float(np.max(np.abs(bose_integral(1.0, zb) + np.log1p(-zb)) / np.maximum(-np.log1p(-zb), 1.0)))
    e3 = abs(bose_integral(1.5, 1.0) - zeta(1.5))
    e4 = max(abs(_fermi_sommerfeld_mu(nu, MU_SOMMERFELD) / _fermi_quad_mu(nu, MU_SOMMERFELD) - 1)
             for nu in (0.5, 1.0, 1.5, 2.0, 2.5))
    ok = e1 <= 1e-12 and e2 <= 1e-12 and e3 <= 1e-10 and e4 <= 1e-9
    assert report("8", ok, f"F_1 {e1:.1e}, B_1 {e2:.1e}, B_3/2(1) - zeta(3/2) {e3:.1e}, "
                           f"Sommerfeld switch {e4:.1e}")
