"""Moments, entropies, norms and residuals of a grid distribution.

Every quantity is computed from ``G`` on the rescaled grid with the weights
``dxi * mu`` (the primary path).  The ``*_f`` variants take physical values,
nodes and the cell volume and serve as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec
from .quantum import ParticleStatistics
from .rescaling import FrameState, cell_volume, velocity_nodes


def _arr(G):
    return np.asarray(getattr(G, "phys", G)).real


def _rel_nodes(grid: GridSpec, frame: FrameState):
    """``L xi / (pi omega)`` per axis, the node offset from ``lambda u``."""
    return [x / frame.scale for x in grid.mesh("xi")]


def moments(G, frame: FrameState, grid: GridSpec) -> dict:
    """``{rho, u, Ec, e}`` by the rescaled-grid quadrature.

    The mean velocity of a zero field is defined as 0.
    """
    g = _arr(G)
    w = grid.dxi * frame.mu
    X = _rel_nodes(grid, frame)
    rho = w * g.sum()
    V = [X[i] + frame.lam * frame.u[i] for i in range(grid.dim)]
    mom = np.array([w * np.sum(V[i] * g) for i in range(grid.dim)])
    u = mom / rho if rho != 0 else np.zeros(grid.dim)
    Ec = w * np.sum(sum(v * v for v in V) * g)
    e = 0.5 * w * np.sum(sum((V[i] - u[i]) ** 2 for i in range(grid.dim)) * g) / rho if rho != 0 else 0.0
    return {"rho": float(rho), "u": u, "Ec": float(Ec), "e": float(e)}


def moments_f(f, V, dv: float) -> dict:
    f = np.asarray(f)
    rho = dv * f.sum()
    u = np.array([dv * np.sum(v * f) for v in V]) / rho if rho != 0 else np.zeros(len(V))
    Ec = dv * np.sum(sum(v * v for v in V) * f)
    e = 0.5 * dv * np.sum(sum((v - u[i]) ** 2 for i, v in enumerate(V)) * f) / rho if rho != 0 else 0.0
    return {"rho": float(rho), "u": u, "Ec": float(Ec), "e": float(e)}


def stress_tensor(G, frame: FrameState, grid: GridSpec) -> np.ndarray:
    """``T_{dd'} = rho^{-1} sum (v_d - u_d)(v_d' - u_d') f dv``."""
    g = _arr(G)
    m = moments(G, frame, grid)
    if m["rho"] == 0:
        return np.zeros((grid.dim, grid.dim))
    w = grid.dxi * frame.mu / m["rho"]
    X = _rel_nodes(grid, frame)
    C = [X[i] + frame.lam * frame.u[i] - m["u"][i] for i in range(grid.dim)]
    T = np.empty((grid.dim, grid.dim))
    for a in range(grid.dim):
        for b in range(a, grid.dim):
            T[a, b] = T[b, a] = w * np.sum(C[a] * C[b] * g)
    return T


@dataclass
class EntropyReport:
    """Entropy value with its admissibility.

    ``defined`` is False when ``alpha f >= 1`` somewhere (the entropy has no
    meaning there); ``value`` is then NaN.  Nodes with ``f <= 0`` contribute
    zero and are counted in ``n_nonpositive``.
    """

    value: float
    defined: bool
    n_nonpositive: int = 0
    reason: str = ""


def _f_values(G, frame: FrameState, grid: GridSpec):
    return frame.mu * frame.scale**grid.dim * _arr(G)


def entropy_classical(G, frame: FrameState, grid: GridSpec) -> float:
    """``dv sum f ln f`` (nonincreasing along relaxation)."""
    f = _f_values(G, frame, grid)
    pos = f > 0
    return float(cell_volume(grid, frame) * np.sum(f[pos] * np.log(f[pos])))


def _entropy_sum(f, alpha: float, dv: float) -> EntropyReport:
    pos = f > 0
    nonpos = int(f.size - pos.sum())
    if alpha == 0:
        return EntropyReport(float(dv * np.sum(f[pos] * np.log(f[pos]))), True, nonpos)
    af = alpha * f
    if np.any(af >= 1):
        return EntropyReport(math.nan, False, nonpos, "alpha f >= 1 at some node")
    fp = f[pos]
    onem = 1.0 - alpha * fp
    val = np.sum(fp * np.log(fp) + onem / alpha * np.log(onem))
    # nodes with f <= 0 are treated as empty (the term vanishes at f = 0)
    return EntropyReport(float(dv * val), True, nonpos)


def entropy_quantum(G, frame: FrameState, grid: GridSpec, stats: ParticleStatistics) -> EntropyReport:
    """``dv sum [f ln f + (1 - alpha f)/alpha ln(1 - alpha f)]`` as a report."""
    return _entropy_sum(_f_values(G, frame, grid), stats.alpha(), cell_volume(grid, frame))


def entropy_quantum_f(f, alpha: float, dv: float) -> EntropyReport:
    return _entropy_sum(np.asarray(f, dtype=float), alpha, dv)


def entropy_dissipation(dGdt, G, frame: FrameState, grid: GridSpec, stats: ParticleStatistics) -> float:
    """Time derivative of the entropy carried by a collision rate.

    ``dv sum (df/dt) ln(f / (1 - alpha f))`` with ``df/dt = mu s^d dG/dt``.
    Nodes outside ``0 < alpha f < 1`` are skipped.
    """
    s_d = frame.mu * frame.scale**grid.dim
    f = s_d * _arr(G)
    df = s_d * np.asarray(dGdt).real
    a = stats.alpha()
    ok = (f > 0) & (a * f < 1)
    psi = np.log(f[ok] / (1.0 - a * f[ok]))
    return float(cell_volume(grid, frame) * np.sum(df[ok] * psi))


def lp_norm(G, frame: FrameState, grid: GridSpec, p: float) -> float:
    """``(dv sum |f|^p)^{1/p}``; ``p = inf`` gives ``max |f|``."""
    f = np.abs(_f_values(G, frame, grid))
    if np.isinf(p):
        return float(f.max())
    return float((cell_volume(grid, frame) * np.sum(f**p)) ** (1.0 / p))


def linf_residual(Q) -> float:
    return float(np.max(np.abs(np.asarray(Q))))


def relaxation_error(f_h, f_inf, dv: float) -> float:
    """``dv sum |f_h - f_inf|``."""
    return float(dv * np.sum(np.abs(np.asarray(f_h) - np.asarray(f_inf))))


def physical(G, frame: FrameState, grid: GridSpec):
    """``(f, nodes, dv)`` for the physical-variable checks."""
    return _f_values(G, frame, grid), velocity_nodes(grid, frame), cell_volume(grid, frame)
