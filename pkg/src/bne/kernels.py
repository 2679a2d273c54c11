"""Kernel-mode tables ``beta(k, l) ~ C * sum_p alpha_p(k) alpha'_p(l)``.

Closed forms cover 2D Maxwell molecules and 3D hard spheres; a
Gauss-Legendre path handles general product kernels ``a(|z|) b(|y|)``.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridSpec


def sinc(x):
    """``sin(x)/x`` with a short series near the origin."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    out[small] = 1.0 - xs * xs / 6.0 + xs**4 / 120.0
    xb = x[~small]
    out[~small] = np.sin(xb) / xb
    return out


@dataclass(frozen=True)
class KernelParams:
    """Product kernel ``B(z, y) = a(|z|) b(|y|)`` plus bookkeeping."""

    dim: int
    a_fn: Callable
    b_fn: Callable
    C_phi: float = 1.0
    gamma: float = 0.0
    kernel_id: str = "custom"


def maxwell2d_params(C_phi: float = 1.0) -> KernelParams:
    return KernelParams(2, lambda r: 2.0 * C_phi + 0.0 * r, lambda r: 1.0 + 0.0 * r, C_phi, 0.0, "maxwell2d")


def hardsphere3d_params(C_phi: float = 1.0) -> KernelParams:
    return KernelParams(3, lambda r: 4.0 * C_phi + 0.0 * r, lambda r: 1.0 + 0.0 * r, C_phi, 1.0, "hardsphere3d")


def vhs_params(dim: int, gamma: float, C_phi: float = 1.0) -> KernelParams:
    """Decoupled VHS kernel ``a(r) = 2^{d-1} C_phi r^{gamma-d+2}``, ``b = 1``."""
    expo = gamma - dim + 2.0
    c = 2.0 ** (dim - 1) * C_phi
    return KernelParams(dim, lambda r: c * np.abs(r) ** expo, lambda r: 1.0 + 0.0 * r, C_phi, gamma, f"vhs{gamma:g}")


@dataclass
class KernelTable:
    grid: GridSpec
    weight_C: float
    count_P: int
    alpha: np.ndarray
    alpha_prime: np.ndarray
    beta_diag: np.ndarray
    gamma: float = 0.0
    C_phi: float = 1.0
    kernel_id: str = "custom"
    meta: dict = field(default_factory=dict)

    def beta(self, k, l) -> float:
        """Reconstruct ``beta(k, l)`` for integer mode vectors in ``I_N``."""
        ia = tuple(int(x) + self.grid.n // 2 for x in k)
        ib = tuple(int(x) + self.grid.n // 2 for x in l)
        return float(self.weight_C * np.dot(self.alpha[(slice(None),) + ia], self.alpha_prime[(slice(None),) + ib]))

    def active_rows(self) -> np.ndarray:
        """Indices ``p`` whose alpha or alpha' row is not identically zero."""
        nz = np.any(self.alpha != 0, axis=tuple(range(1, self.alpha.ndim)))
        nz &= np.any(self.alpha_prime != 0, axis=tuple(range(1, self.alpha.ndim)))
        return np.flatnonzero(nz)


def _finish(grid, C, alpha, alpha_prime, **kw) -> KernelTable:
    beta_diag = C * np.einsum("p...,p...->...", alpha, alpha_prime)
    return KernelTable(grid, float(C), alpha.shape[0], alpha, alpha_prime, beta_diag, **kw)


def _dirs3d(M1: int, M2: int, theta_rule: str = "rectangle"):
    """Directions ``e_{theta_p, phi_q}`` (row ``q + M2 p``) and polar weights.

    The returned weight multiplies ``sin(theta_p)`` so that ``pi/M1`` times
    the weight sum is the polar quadrature.  ``rectangle`` uses
    ``theta_p = p pi / M1``; ``gauss`` uses Gauss-Legendre nodes on
    ``[0, pi]``, which avoids the endpoint error of the rectangle rule.
    """
    if theta_rule == "rectangle":
        th = np.pi * np.arange(M1) / M1
        wth = np.sin(th)
    elif theta_rule == "gauss":
        th, w = _gl(0.0, np.pi, M1)
        wth = np.sin(th) * w * M1 / np.pi
    else:
        raise ValueError(f"unknown theta_rule {theta_rule!r}")
    ph = np.pi * np.arange(M2) / M2
    T, P = np.meshgrid(th, ph, indexing="ij")
    e = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    return e, np.repeat(wth, M2)


def _proj(grid, dirs, flip=None):
    """``k.e`` and ``|Pi_{e-perp} k|`` for every direction and mode.

    ``flip`` is a tuple of booleans; on flagged axes the Nyquist index
    ``-n/2`` is replaced by its alias ``+n/2``.
    """
    k = np.stack(grid.mesh("k"), axis=-1).copy()
    if flip is not None:
        for ax, f in enumerate(flip):
            if f:
                sl = k[..., ax]
                sl[sl == -(grid.n // 2)] = grid.n // 2
    s = np.tensordot(dirs, k, axes=([1], [-1]))
    k2 = np.sum(k * k, axis=-1)
    perp = np.sqrt(np.maximum(k2[None] - s * s, 0.0))
    return s, perp


def _modes(grid, dirs, value_fn, nyquist):
    """Evaluate ``value_fn(k.e, |Pi k|)`` on all modes.

    With ``nyquist="average"`` entries on the Nyquist boundary are averaged
    over the aliases ``-n/2 <-> +n/2``; the table is then even modulo ``n``
    and its inverse transform is real.  ``"exact"`` keeps pointwise values.
    """
    if nyquist == "exact":
        return value_fn(*_proj(grid, dirs))
    if nyquist != "average":
        raise ValueError(f"unknown nyquist mode {nyquist!r}")
    masks = list(itertools.product((False, True), repeat=grid.dim))
    acc = sum(value_fn(*_proj(grid, dirs, m)) for m in masks)
    return acc / len(masks)


def build_maxwell2d(grid: GridSpec, M: int = 8, C_phi: float = 1.0, nyquist: str = "average") -> KernelTable:
    if grid.dim != 2:
        raise ValueError("build_maxwell2d needs a 2D grid")
    if M <= 0:
        raise ValueError("M must be positive")
    R = grid.trunc_R
    th = np.pi * np.arange(M) / M
    e = np.stack([np.cos(th), np.sin(th)], axis=1)
    ep = np.stack([-np.sin(th), np.cos(th)], axis=1)
    alpha = _modes(grid, e, lambda s, _: 2.0 * C_phi * 2.0 * R * sinc(R * s), nyquist)
    alpha_prime = _modes(grid, ep, lambda s, _: 2.0 * R * sinc(R * s), nyquist)
    return _finish(grid, np.pi / M, alpha, alpha_prime, gamma=0.0, C_phi=C_phi, kernel_id="maxwell2d",
                   meta={"M": M, "nyquist": nyquist})


def build_maxwell2d_symmetric(
    grid: GridSpec, M: int = 4, C_phi: float = 1.0, nyquist: str = "average"
) -> KernelTable:
    """Rule on nodes ``p pi / (2M)`` that evaluates each profile once.

    The perpendicular node of ``theta_p`` is ``theta_{p+M}``, so the same
    ``2M`` sinc profiles serve as both alpha and alpha' (the kernel factors
    ``a`` and ``b`` are constant).  The result equals the plain rule with
    ``2M`` nodes.
    """
    if grid.dim != 2:
        raise ValueError("build_maxwell2d_symmetric needs a 2D grid")
    if M <= 0:
        raise ValueError("M must be positive")
    R = grid.trunc_R
    th = np.pi * np.arange(2 * M) / (2 * M)
    e = np.stack([np.cos(th), np.sin(th)], axis=1)
    prof = _modes(grid, e, lambda s, _: 2.0 * R * sinc(R * s), nyquist)
    alpha = 2.0 * C_phi * prof
    alpha_prime = np.roll(prof, -M, axis=0)
    return _finish(
        grid, np.pi / (2 * M), alpha, alpha_prime, gamma=0.0, C_phi=C_phi, kernel_id="maxwell2d_sym", meta={"M": M, "nyquist": nyquist}
    )


def build_hardsphere3d(
    grid: GridSpec,
    M1: int = 4,
    M2: int = 4,
    C_phi: float = 1.0,
    theta_rule: str = "rectangle",
    nyquist: str = "average",
) -> KernelTable:
    if grid.dim != 3:
        raise ValueError("build_hardsphere3d needs a 3D grid")
    if M1 <= 0 or M2 <= 0:
        raise ValueError("M1 and M2 must be positive")
    R = grid.trunc_R
    dirs, sth = _dirs3d(M1, M2, theta_rule)
    sth = sth.reshape((-1,) + (1,) * 3)
    phi3 = _modes(grid, dirs, lambda s, _: R**2 * (2.0 * sinc(R * s) - sinc(R * s / 2.0) ** 2), nyquist)
    alpha = 4.0 * C_phi * sth * phi3
    alpha_prime = _modes(grid, dirs, lambda _, perp: 2.0 * R**2 * sinc(R * perp / 2.0) ** 2, nyquist)
    return _finish(
        grid,
        np.pi**2 / (M1 * M2),
        alpha,
        alpha_prime,
        gamma=1.0,
        C_phi=C_phi,
        kernel_id="hardsphere3d",
        meta={"M1": M1, "M2": M2, "theta_rule": theta_rule, "nyquist": nyquist},
    )


# quadrature path


class QuadratureError(RuntimeError):
    pass


def _gl(a: float, b: float, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _phi(fn, R, s, order, radial_power):
    """``int_{-R}^{R} fn(|rho|) |rho|^m exp(i rho s) d rho`` as a complex array.

    The two half-intervals are integrated separately so the ``|rho|`` kink
    sits on a panel edge.
    """
    s = np.asarray(s, dtype=float)
    xa, wa = _gl(-R, 0.0, order)
    xb, wb = _gl(0.0, R, order)
    x = np.concatenate([xa, xb])
    wt = np.concatenate([wa, wb]) * fn(np.abs(x)) * np.abs(x) ** radial_power
    flat = s.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    step = max(1, 2_000_000 // x.size)
    for i in range(0, flat.size, step):
        out[i : i + step] = np.exp(1j * np.outer(flat[i : i + step], x)) @ wt
    return out.reshape(s.shape)


def _psi(fn, R, s, order):
    """``int_0^pi sin t * phi3_b(s cos t) dt`` (convention of the closed form)."""
    t, w = _gl(0.0, np.pi, order)
    s = np.asarray(s, dtype=float)
    vals = _phi(fn, R, s[..., None] * np.cos(t), order, 1)
    return vals @ (w * np.sin(t))


def _real(z, what):
    z = np.asarray(z)
    scale = max(np.abs(z).max(initial=0.0), 1e-300)
    if np.abs(z.imag).max(initial=0.0) > 1e-10 * max(scale, 1.0):
        raise QuadratureError(f"{what}: imaginary part above 1e-10")
    return z.real


def _psi_table(fn, R, perp, order):
    # alpha' depends on |Pi k| only: evaluate on the distinct values
    uniq, inv = np.unique(np.round(perp, 12), return_inverse=True)
    vals = _real(_psi(fn, R, uniq, order), "alpha'")
    return vals[inv].reshape(perp.shape)


def _vhs_arrays(grid, params, order, M, M1, M2, theta_rule="rectangle", nyquist="average"):
    R = grid.trunc_R
    if grid.dim == 2:
        th = np.pi * np.arange(M) / M
        e = np.stack([np.cos(th), np.sin(th)], axis=1)
        ep = np.stack([-np.sin(th), np.cos(th)], axis=1)
        alpha = _modes(grid, e, lambda s, _: _real(_phi(params.a_fn, R, s, order, 0), "alpha"), nyquist)
        alpha_prime = _modes(grid, ep, lambda s, _: _real(_phi(params.b_fn, R, s, order, 0), "alpha'"), nyquist)
        return np.pi / M, alpha, alpha_prime
    dirs, sth = _dirs3d(M1, M2, theta_rule)
    phi3 = _modes(grid, dirs, lambda s, _: _real(_phi(params.a_fn, R, s, order, 1), "alpha"), nyquist)
    alpha = sth.reshape(-1, 1, 1, 1) * phi3
    alpha_prime = _modes(grid, dirs, lambda _, perp: _psi_table(params.b_fn, R, perp, order), nyquist)
    return np.pi**2 / (M1 * M2), alpha, alpha_prime


def build_vhs_quadrature(
    grid: GridSpec,
    params: KernelParams,
    quad_order: int = 64,
    M: int = 8,
    M1: int = 4,
    M2: int = 4,
    theta_rule: str = "rectangle",
    nyquist: str = "average",
) -> KernelTable:
    """Gauss-Legendre kernel modes for a product kernel ``a(|z|) b(|y|)``."""
    if quad_order < 8:
        raise ValueError("quad_order must be >= 8")
    if params.dim != grid.dim:
        raise ValueError("kernel and grid dimensions differ")
    C, a1, b1 = _vhs_arrays(grid, params, quad_order, M, M1, M2, theta_rule, nyquist)
    _, a2, b2 = _vhs_arrays(grid, params, 2 * quad_order, M, M1, M2, theta_rule, nyquist)
    if max(np.abs(a1 - a2).max(), np.abs(b1 - b2).max()) > 1e-8:
        raise QuadratureError(f"quadrature of order {quad_order} not converged; raise quad_order")
    meta = {"M": M} if grid.dim == 2 else {"M1": M1, "M2": M2, "theta_rule": theta_rule}
    meta["quad_order"] = quad_order
    meta["nyquist"] = nyquist
    return _finish(grid, C, a1, b1, gamma=params.gamma, C_phi=params.C_phi, kernel_id=params.kernel_id, meta=meta)


def _beta_ref_once(grid, params, k, l, order, literal):
    R = grid.trunc_R
    k = np.asarray(k, dtype=float)
    l = np.asarray(l, dtype=float)
    if grid.dim == 2:
        # half-line radial integrals, both perpendicular directions
        th, w = _gl(0.0, 2.0 * np.pi, 2 * order)
        e = np.stack([np.cos(th), np.sin(th)], axis=1)
        ep = np.stack([-np.sin(th), np.cos(th)], axis=1)
        x, wx = _gl(0.0, R, order)
        A = (wx * params.a_fn(x) * np.exp(1j * np.outer(e @ k, x))).sum(axis=1)
        Bp = (wx * params.b_fn(x) * np.exp(1j * np.outer(ep @ l, x))).sum(axis=1)
        Bm = (wx * params.b_fn(x) * np.exp(-1j * np.outer(ep @ l, x))).sum(axis=1)
        return complex(np.sum(w * A * (Bp + Bm)))
    th, wt = _gl(0.0, np.pi, order)
    ph, wp = _gl(0.0, np.pi, order)
    T, P = np.meshgrid(th, ph, indexing="ij")
    W = np.outer(wt, wp) * np.sin(T)
    e = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    ke = e @ k
    lperp = np.sqrt(np.maximum(l @ l - (e @ l) ** 2, 0.0))
    phi_a = _phi(params.a_fn, R, ke, order, 1)
    if literal:
        # arc-length measure on the great circle orthogonal to e
        t, wc = _gl(0.0, np.pi, order)
        psi = _phi(params.b_fn, R, lperp[..., None] * np.cos(t), order, 1) @ wc
    else:
        psi = _psi(params.b_fn, R, lperp, order)
    return complex(np.sum(W * phi_a * psi))


def beta_reference(
    grid: GridSpec, params: KernelParams, k, l, quad_order: int = 64, literal: bool = False
) -> float:
    """Brute-force kernel mode ``beta(k, l)`` by nested Gauss-Legendre quadrature.

    2D integrates the two orthogonal half-lines around the full circle.  3D
    integrates the sphere of directions against the circle integral
    ``psi``; by default ``psi`` carries the ``sin`` weight that the
    hard-sphere closed form encodes, ``literal=True`` uses plain arc length.
    """
    half = grid.n // 2
    if max(np.abs(k).max(), np.abs(l).max()) > half:
        raise ValueError("|k|, |l| must not exceed n/2")
    b1 = _beta_ref_once(grid, params, k, l, quad_order, literal)
    b2 = _beta_ref_once(grid, params, k, l, 2 * quad_order, literal)
    if abs(b1 - b2) > 1e-10 * max(abs(b2), 1.0):
        raise QuadratureError(f"beta_reference not converged at order {quad_order}")
    if abs(b2.imag) > 1e-9 * max(abs(b2), 1.0):
        raise QuadratureError("beta_reference has a non-negligible imaginary part")
    return b2.real


# binary cache

_MAGIC = b"BNEK"
_VERSION = 1


def save_table(table: KernelTable, path) -> None:
    kid = table.kernel_id.encode()
    g = table.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIII", _VERSION, g.dim, g.n, table.count_P))
        fh.write(struct.pack("<ddddddd", g.half_width_L, g.support_S, g.trunc_R, g.trunc_ratio,
                             table.weight_C, table.gamma, table.C_phi))
        fh.write(struct.pack("<I", len(kid)) + kid)
        fh.write(np.ascontiguousarray(table.alpha, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(table.alpha_prime, dtype="<f8").tobytes())


def load_table(path) -> KernelTable:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a kernel table file")
        version, dim, n, P = struct.unpack("<IIII", fh.read(16))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        L, S, R, ratio, C, gamma, C_phi = struct.unpack("<ddddddd", fh.read(56))
        (ln,) = struct.unpack("<I", fh.read(4))
        kid = fh.read(ln).decode()
        count = P * n**dim
        alpha = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape((P,) + (n,) * dim).astype(float)
        alpha_prime = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape((P,) + (n,) * dim).astype(float)
    grid = GridSpec(dim, n, L, S, R, ratio)
    return _finish(grid, C, alpha, alpha_prime, gamma=gamma, C_phi=C_phi, kernel_id=kid)
