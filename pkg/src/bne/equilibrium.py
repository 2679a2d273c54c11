"""Predicted large-time states and their discretization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, SpectralField
from .quantum import CLASSICAL, CONDENSATE, FERMI, REGULAR, SATURATED, ParticleStatistics, solve_from_mass_energy
from .rescaling import FrameState, to_rescaled, velocity_nodes


@dataclass
class EquilibriumState:
    """Tagged limit state, all quantities in velocity units.

    ``variant`` is one of ``Classical``, ``Quantum``, ``Condensate3D``,
    ``Saturated`` or ``Undetermined``.
    """

    variant: str
    stats: ParticleStatistics
    rho: float
    u: np.ndarray
    e: float
    T: float | None = None
    z: float | None = None
    m0: float = 0.0
    A: float | None = None
    eta: float | None = None
    meta: dict = field(default_factory=dict)


def classify(moments: dict, stats: ParticleStatistics) -> EquilibriumState:
    """Limit state predicted by the moments ``{rho, u, e}``."""
    rho, e = float(moments["rho"]), float(moments["e"])
    u = np.asarray(moments.get("u", np.zeros(stats.dim)), dtype=float)
    d = stats.dim
    if stats.kind == CLASSICAL:
        return EquilibriumState("Classical", stats, rho, u, e, T=2.0 * e / d)
    rep = solve_from_mass_energy(stats, rho, e)
    if rep.regime == REGULAR:
        return EquilibriumState("Quantum", stats, rho, u, e, T=rep.T, z=rep.z, eta=rep.eta)
    if rep.regime == CONDENSATE:
        return EquilibriumState("Condensate3D", stats, rho, u, e, T=rep.T, z=1.0, m0=rep.m0, eta=rep.eta)
    if rep.regime == SATURATED:
        A = math.sqrt(2.0 * e * (d + 2) / d)
        return EquilibriumState("Saturated", stats, rho, u, e, T=0.0, z=math.inf, A=A, eta=rep.eta)
    return EquilibriumState("Undetermined", stats, rho, u, e, eta=rep.eta)


def _quantum_density(stats, z, T, r2):
    a = stats.alpha()
    x = r2 / (2.0 * T)
    if stats.kind == FERMI:
        # 1/|a| * z e^{-x} / (1 + z e^{-x}), stable for large z and x
        return np.exp(-np.logaddexp(0.0, x - math.log(z))) / abs(a)
    with np.errstate(divide="ignore"):
        return 1.0 / abs(a) / np.expm1(x - math.log(z))


def eval_state(state: EquilibriumState, v):
    """Regular density at velocities ``v`` and the point-mass weight at ``u``.

    Parameters
    ----------
    v : sequence of ndarray
        One coordinate array per velocity axis.

    Returns
    -------
    values : ndarray
        Regular part; ``+inf`` at the singular point of a ``z = 1`` Bose state.
    point_mass : float
        ``m0`` located at ``u`` (zero except for condensates).
    """
    if state.variant == "Undetermined":
        raise ValueError("no limit state is available for an undetermined Fermi case")
    v = [np.asarray(c, dtype=float) for c in v]
    r2 = sum((c - state.u[i]) ** 2 for i, c in enumerate(v))
    d = state.stats.dim
    if state.variant == "Classical":
        return state.rho * (2.0 * math.pi * state.T) ** (-d / 2.0) * np.exp(-r2 / (2.0 * state.T)), 0.0
    if state.variant == "Saturated":
        return np.where(r2 <= state.A**2, state.stats.hbar ** (-d), 0.0), 0.0
    vals = _quantum_density(state.stats, state.z, state.T, r2)
    if state.variant == "Condensate3D":
        return vals, state.m0
    return vals, 0.0


def discretize(state: EquilibriumState, grid: GridSpec, frame: FrameState) -> SpectralField:
    """Sample the regular part on the frame nodes and return ``G``.

    Condensate point masses are not added to the grid; they are recorded in
    ``field.meta``.  A node on the singular point of a ``z = 1`` Bose state
    is reported through ``meta['nan_hazard']``.
    """
    V = velocity_nodes(grid, frame)
    vals, m0 = eval_state(state, V)
    hazard = not np.all(np.isfinite(vals))
    out = to_rescaled(np.where(np.isfinite(vals), vals, np.nan), frame, grid)
    out.meta.update(point_mass=m0, point_mass_at=state.u.copy(), nan_hazard=hazard)
    return out
