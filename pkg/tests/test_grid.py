import math

import numpy as np
import pytest

from bne.grid import SpectralField, build_grid, fft_c, forward, fourier_derivative, ifft_c, inverse


def test_radii_on_the_anti_aliasing_bound():
    g = build_grid(2, 64, 4.0, 1.0)
    assert g.support_S == pytest.approx(2 * math.pi / (3 + math.sqrt(2)), rel=1e-15)
    # the quoted 1.42343 is the closed form rounded loosely (1.423399)
    assert g.support_S == pytest.approx(1.42343, abs=5e-5)
    assert g.trunc_R == g.support_S
    g3 = build_grid(3, 16, 6.0, 2.0)
    assert g3.support_S == pytest.approx(2 * math.pi / (5 + math.sqrt(2)), rel=1e-15)
    assert g3.trunc_R == pytest.approx(2 * g3.support_S, rel=1e-15)
    lam = g3.trunc_R / g3.support_S
    assert g3.support_S <= 2 * math.pi / (2 * lam + 1 + math.sqrt(2)) * (1 + 1e-15)


def test_index_set():
    g = build_grid(2, 8, 1.0)
    assert list(g.index) == [-4, -3, -2, -1, 0, 1, 2, 3]
    assert g.size == 64 and g.shape == (8, 8)
    assert g.dxi == pytest.approx((2 * math.pi / 8) ** 2)


@pytest.mark.parametrize("args", [(2, 7, 1.0), (4, 8, 1.0), (2, 2, 1.0), (2, 8, -1.0), (2, 8, 1.0, 0.5)])
def test_rejects_bad_grids(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_non_power_of_two_flag():
    assert "non_power_of_two" in build_grid(2, 12, 1.0).flags
    assert build_grid(2, 16, 1.0).flags == ()


def test_constant_and_cosine_modes():
    g = build_grid(2, 8, 1.0)
    c = forward(SpectralField(g, phys=np.ones(g.shape))).coef
    h = g.n // 2
    assert c[h, h] == pytest.approx(1.0)
    c[h, h] = 0
    assert np.abs(c).max() < 1e-15
    xi = g.mesh("xi")
    c = fft_c(np.cos(xi[0]))
    assert c[h + 1, h] == pytest.approx(0.5) and c[h - 1, h] == pytest.approx(0.5)
    c[h + 1, h] = c[h - 1, h] = 0
    assert np.abs(c).max() < 1e-15


@pytest.mark.parametrize("dim", [2, 3])
def test_round_trip_and_hermitian_symmetry(dim):
    g = build_grid(dim, 8, 1.0)
    rng = np.random.default_rng(1)
    a = rng.standard_normal(g.shape)
    f = SpectralField(g, phys=a)
    c = f.coef
    # c_{-k} = conj(c_k), indices mod n
    idx = tuple((-np.arange(g.n)) % g.n for _ in range(dim))
    flipped = np.fft.ifftshift(c)[np.ix_(*idx)]
    assert np.allclose(np.fft.fftshift(flipped), np.conj(c), atol=1e-15)
    back = SpectralField(g, coef=c).phys
    assert np.abs(back - a).max() <= 1e-13
    assert np.abs(ifft_c(fft_c(a)) - a).max() <= 1e-13


def test_lazy_representations():
    g = build_grid(2, 8, 1.0)
    f = SpectralField(g, phys=np.ones(g.shape))
    assert f.phys_current and not f.coef_current
    f.coef
    assert f.coef_current
    f.set_coef(np.zeros(g.shape))
    assert not f.phys_current
    assert np.all(f.phys == 0)
    with pytest.raises(ValueError):
        SpectralField(g)
    with pytest.raises(ValueError):
        SpectralField(g, phys=np.ones((4, 4)))
    with pytest.raises(ValueError):
        inverse(SpectralField(g, phys=np.ones(g.shape)))
    cp = f.copy()
    cp.meta["x"] = 1
    assert "x" not in f.meta


def test_fourier_derivative_of_a_trigonometric_field():
    g = build_grid(2, 16, 1.0)
    xi = g.mesh("xi")
    f = SpectralField(g, phys=np.sin(2 * xi[0]) * np.cos(xi[1]))
    d0 = fourier_derivative(f, 0).phys
    d1 = fourier_derivative(f, 1).phys
    assert np.abs(d0 - 2 * np.cos(2 * xi[0]) * np.cos(xi[1])).max() < 1e-13
    assert np.abs(d1 + np.sin(2 * xi[0]) * np.sin(xi[1])).max() < 1e-13
