import numpy as np
import pytest

from bne.grid import build_grid
from bne.kernels import (QuadratureError, beta_reference, build_hardsphere3d, build_maxwell2d,
                         build_maxwell2d_symmetric, build_vhs_quadrature, hardsphere3d_params, load_table,
                         maxwell2d_params, save_table, sinc, vhs_params)


def test_sinc_at_zero_and_away():
    assert sinc(0.0) == 1.0
    assert sinc(np.pi) == pytest.approx(0.0, abs=1e-16)
    assert sinc(1e-9) == pytest.approx(1.0, abs=1e-16)


def test_maxwell2d_table_shapes_and_weight():
    g = build_grid(2, 8, 4.0)
    t = build_maxwell2d(g, 4)
    assert t.count_P == 4 and t.alpha.shape == (4, 8, 8)
    assert t.weight_C == pytest.approx(np.pi / 4)
    # zero-mode entries: alpha_p(0) = 4 C_phi R, alpha'_p(0) = 2 R
    h = 4
    assert np.allclose(t.alpha[:, h, h], 4 * g.trunc_R)
    assert np.allclose(t.alpha_prime[:, h, h], 2 * g.trunc_R)
    assert t.beta((0, 0), (0, 0)) == pytest.approx(np.pi * 8 * g.trunc_R**2)


def test_maxwell2d_beta_against_quadrature():
    g = build_grid(2, 8, 4.0)
    t = build_maxwell2d(g, 64, nyquist="exact")
    rng = np.random.default_rng(3)
    for _ in range(5):
        k, l = rng.integers(-3, 4, size=2), rng.integers(-3, 4, size=2)
        ref = beta_reference(g, maxwell2d_params(), k, l, quad_order=48)
        assert t.beta(k, l) == pytest.approx(ref, rel=1e-8, abs=1e-10)


def test_symmetric_rule_equals_plain_rule():
    g = build_grid(2, 16, 4.0)
    s = build_maxwell2d_symmetric(g, 4)
    p = build_maxwell2d(g, 8)
    assert np.abs(s.beta_diag - p.beta_diag).max() <= 1e-12 * np.abs(p.beta_diag).max()
    assert s.beta((1, 2), (3, -1)) == pytest.approx(p.beta((1, 2), (3, -1)), rel=1e-12)


def test_vhs_quadrature_reproduces_closed_forms():
    g = build_grid(2, 8, 4.0)
    q = build_vhs_quadrature(g, vhs_params(2, 0.0), quad_order=32, M=4)
    c = build_maxwell2d(g, 4)
    assert np.abs(q.alpha - c.alpha).max() < 1e-10
    assert np.abs(q.alpha_prime - c.alpha_prime).max() < 1e-10
    g3 = build_grid(3, 6, 4.0)
    q3 = build_vhs_quadrature(g3, vhs_params(3, 1.0), quad_order=32, M1=2, M2=2)
    c3 = build_hardsphere3d(g3, 2, 2)
    assert np.abs(q3.alpha - c3.alpha).max() < 1e-9 * np.abs(c3.alpha).max()
    assert np.abs(q3.alpha_prime - c3.alpha_prime).max() < 1e-9 * np.abs(c3.alpha_prime).max()


def test_hardsphere_gauss_rule_converges_to_reference():
    g = build_grid(3, 8, 4.0)
    k, l = np.array([1, 0, 2]), np.array([-1, 2, 0])
    ref = beta_reference(g, hardsphere3d_params(), k, l, quad_order=40)
    errs = [abs(build_hardsphere3d(g, M, M, theta_rule="gauss", nyquist="exact").beta(k, l) - ref)
            for M in (4, 8, 16)]
    assert errs[2] < errs[0] and errs[2] < 1e-6 * abs(ref)


def test_table_is_even_and_transforms_real():
    g = build_grid(2, 8, 4.0)
    t = build_maxwell2d(g, 4)
    # average over Nyquist aliases makes every row even modulo n
    a = np.fft.ifftshift(t.alpha, axes=(1, 2))
    flip = a[:, (-np.arange(8)) % 8][:, :, (-np.arange(8)) % 8]
    assert np.abs(a - flip).max() < 1e-14


def test_save_and_load_round_trip(tmp_path):
    g = build_grid(3, 6, 4.0)
    t = build_hardsphere3d(g, 2, 3)
    path = tmp_path / "t.bin"
    save_table(t, path)
    u = load_table(path)
    assert np.array_equal(u.alpha, t.alpha) and np.array_equal(u.alpha_prime, t.alpha_prime)
    assert u.weight_C == t.weight_C and u.gamma == t.gamma and u.kernel_id == t.kernel_id
    assert u.grid.n == 6 and u.grid.support_S == g.support_S
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nope")
    with pytest.raises(ValueError):
        load_table(bad)


def test_builders_reject_bad_arguments():
    g2, g3 = build_grid(2, 8, 4.0), build_grid(3, 6, 4.0)
    with pytest.raises(ValueError):
        build_maxwell2d(g3)
    with pytest.raises(ValueError):
        build_hardsphere3d(g2)
    with pytest.raises(ValueError):
        build_maxwell2d(g2, 0)
    with pytest.raises(ValueError):
        build_vhs_quadrature(g2, vhs_params(3, 1.0))
    with pytest.raises(ValueError):
        build_vhs_quadrature(g2, vhs_params(2, 0.0), quad_order=4)
    with pytest.raises(ValueError):
        beta_reference(g2, maxwell2d_params(), (5, 0), (0, 0))


def test_unconverged_quadrature_is_reported():
    g = build_grid(2, 16, 40.0)
    # a strongly singular radial factor cannot be resolved at low order
    with pytest.raises(QuadratureError):
        build_vhs_quadrature(g, vhs_params(2, -0.9), quad_order=8, M=2)
