"""Velocity rescaling between the distribution ``f`` and the grid unknown ``G``.

``f(v) = mu (pi omega / L)^d G(xi)`` with ``xi = (pi omega / L)(v - lambda u)``.
The classical method is the frame ``(lambda, omega, mu) = (0, 1, (L/pi)^d)``;
the rescaled method uses ``lambda = mu = 1`` and a moving ``omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import GridSpec, SpectralField, fourier_derivative
from .quantum import (CLASSICAL, CONDENSATE, REGULAR, SATURATED, UNDETERMINED, ParticleStatistics,
                      solve_from_mass_energy, zeta)

OMEGA_FLOOR = 1e-6


@dataclass(frozen=True)
class FrameState:
    """Rescaling frame.

    Attributes
    ----------
    omega : float
        Velocity scale, positive.
    u : ndarray
        Frame velocity, used when ``lam == 1``.
    mu : float
        Amplitude scale.
    lam : int
        0 (fixed box) or 1 (box follows ``u``).
    half_width_L : float
    """

    omega: float
    u: np.ndarray
    mu: float
    lam: int
    half_width_L: float
    flags: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.lam not in (0, 1):
            raise ValueError("lam must be 0 or 1")

    @property
    def scale(self) -> float:
        """``pi omega / L``, the map from velocity to xi units."""
        return math.pi * self.omega / self.half_width_L

    def with_(self, **kw) -> "FrameState":
        return replace(self, **kw)


def classical_frame(dim: int, L: float) -> FrameState:
    return FrameState(1.0, np.zeros(dim), (L / math.pi) ** dim, 0, L)


def rescaled_frame(omega: float, u, L: float) -> FrameState:
    return FrameState(float(omega), np.asarray(u, dtype=float), 1.0, 1, L)


def velocity_nodes(grid: GridSpec, frame: FrameState) -> list[np.ndarray]:
    """Physical nodes ``v_j = lambda u + L xi_j / (pi omega)`` per axis."""
    return [x / frame.scale + frame.lam * frame.u[i] for i, x in enumerate(grid.mesh("xi"))]


def cell_volume(grid: GridSpec, frame: FrameState) -> float:
    """``Delta v = (2 L / (omega n))^d``."""
    return (2.0 * frame.half_width_L / (frame.omega * grid.n)) ** grid.dim


def to_rescaled(f_values, frame: FrameState, grid: GridSpec) -> SpectralField:
    """Grid unknown ``G = mu^{-1} (pi omega / L)^{-d} f`` at the frame nodes."""
    G = np.asarray(f_values, dtype=float) / (frame.mu * frame.scale**grid.dim)
    return SpectralField(grid, phys=G)


def from_rescaled(G: SpectralField, frame: FrameState) -> np.ndarray:
    return frame.mu * frame.scale**G.grid.dim * np.asarray(G.phys).real


def scale_factors(frame: FrameState, stats: ParticleStatistics, gamma: float, c: float = 1.0):
    """``(alpha_eff, c_pre) = (alpha mu s^d, c mu s^{-gamma})`` with ``s = pi omega / L``."""
    s = frame.scale
    return stats.alpha() * frame.mu * s**stats.dim, c * frame.mu * s ** (-gamma)


def moment_rates(Q, frame: FrameState, grid: GridSpec, c_pre: float = 1.0):
    """Rates of ``(rho, rho u, rho e)`` carried by a collision field.

    ``Q`` is the bracket operator on ``G``; ``c_pre`` its prefactor, so the
    rates are ``dxi mu c_pre sum_j w_j Q_j`` with weights ``1``, ``v_j`` and
    ``|v_j - u|^2 / 2``.
    """
    Q = np.asarray(Q).real
    w = grid.dxi * frame.mu * c_pre
    V = [x / frame.scale for x in grid.mesh("xi")]
    drho = w * Q.sum()
    dmom = np.array([w * np.sum((V[i] + frame.lam * frame.u[i]) * Q) for i in range(grid.dim)])
    rel2 = sum((V[i] + (frame.lam - 1) * frame.u[i]) ** 2 for i in range(grid.dim))
    dener = 0.5 * w * np.sum(rel2 * Q)
    return drho, dmom, dener


@dataclass
class TemperatureUpdate:
    """Temperature, fugacity and omega produced by one frame update."""

    T: float | None
    z: float | None
    omega: float
    regime: str
    m0: float = 0.0
    flags: tuple = ()


def temperature(stats: ParticleStatistics, rho: float, e: float) -> TemperatureUpdate:
    """Temperature and fugacity from ``(rho, e)`` following the frame recipe.

    The 3D Bose condensate branch uses the energy-consistent temperature
    ``[2 |alpha| rho e / (3 zeta(5/2) (2 pi)^{3/2})]^{2/5}``.
    """
    d = stats.dim
    if stats.kind == CLASSICAL:
        return TemperatureUpdate(2.0 * e / d, None, math.nan, REGULAR)
    rep = solve_from_mass_energy(stats, rho, e)
    if rep.regime == REGULAR:
        return TemperatureUpdate(rep.T, rep.z, math.nan, REGULAR)
    if rep.regime == CONDENSATE:
        a = abs(stats.alpha())
        T = (2.0 * a * rho * e / (3.0 * zeta(2.5) * (2.0 * math.pi) ** 1.5)) ** 0.4
        m0 = rho - (2.0 * math.pi * T) ** 1.5 * zeta(1.5) / a
        return TemperatureUpdate(T, 1.0, math.nan, CONDENSATE, m0)
    if rep.regime == SATURATED:
        return TemperatureUpdate(0.0, math.inf, math.nan, SATURATED)
    return TemperatureUpdate(None, None, math.nan, UNDETERMINED)


def update_omega(moments: dict, stats: ParticleStatistics, omega_prev: float | None = None) -> TemperatureUpdate:
    """Next velocity scale from ``{rho, u, e}``.

    Quantum: ``omega = sqrt(T)``; classical: ``omega = sqrt(T + |u|^2 / d)``.
    A saturated state (``T = 0``) is floored at ``OMEGA_FLOOR``; an
    undetermined one keeps ``omega_prev``.  Both raise a flag.
    """
    rho, e = moments["rho"], moments["e"]
    u = np.asarray(moments["u"], dtype=float)
    upd = temperature(stats, rho, e)
    if stats.kind == CLASSICAL:
        upd.omega = math.sqrt(upd.T + float(u @ u) / stats.dim)
    elif upd.regime == UNDETERMINED:
        if omega_prev is None:
            raise ValueError("undetermined state and no previous omega")
        upd.omega = omega_prev
        upd.flags = ("undetermined",)
    else:
        om = math.sqrt(upd.T)
        if om < OMEGA_FLOOR:
            upd.flags = ("omega_floor",)
            om = OMEGA_FLOOR
        upd.omega = om
    return upd


def divergence_term(G: SpectralField, frame: FrameState, omega_rate: float, u_rate, grid: GridSpec) -> np.ndarray:
    """``div_xi (a G)`` with ``a(xi) = omega_rate / omega * xi - lam s u_rate``.

    ``omega_rate`` and ``u_rate`` are the time differences ``d omega / dt``
    and ``du / dt`` of the frame update.
    """
    u_rate = np.zeros(grid.dim) if u_rate is None else np.asarray(u_rate, dtype=float)
    g = np.asarray(G.phys).real
    xi = grid.mesh("xi")
    out = np.zeros(grid.shape)
    for ax in range(grid.dim):
        a = omega_rate / frame.omega * xi[ax] - frame.lam * frame.scale * u_rate[ax]
        if np.all(a == 0):
            continue
        out += fourier_derivative(SpectralField(grid, phys=a * g), ax).phys.real
    return out
