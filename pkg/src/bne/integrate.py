"""Forward Euler and SSP-RK2 time stepping of the (rescaled) homogeneous equation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .collision import BlowUpError, CollisionWorkspace, assemble_Q
from .diagnostics import moments as grid_moments
from .grid import SpectralField
from .kernels import KernelTable
from .quantum import ParticleStatistics
from .rescaling import FrameState, divergence_term, moment_rates, scale_factors, update_omega


@dataclass
class SimState:
    """Everything one time step needs.

    ``rho``, ``mom`` (``rho u``) and ``energy`` (``rho e``) are the moment
    unknowns; with rescaling they are advanced by the collision rates, without
    rescaling they are recomputed from ``G`` after each step.
    """

    step: int
    t: float
    G: np.ndarray
    frame: FrameState
    rho: float
    mom: np.ndarray
    energy: float
    stats: ParticleStatistics
    table: KernelTable
    dt: float
    c: float = 1.0
    rescale: bool = False
    flags: tuple = ()
    T: Optional[float] = None
    z: Optional[float] = None
    last_Q: Optional[np.ndarray] = None
    workspace: Optional[CollisionWorkspace] = None

    @property
    def grid(self):
        return self.table.grid

    @property
    def u(self) -> np.ndarray:
        return self.mom / self.rho

    @property
    def e(self) -> float:
        return self.energy / self.rho

    @property
    def moments(self) -> dict:
        return {"rho": self.rho, "u": self.u, "e": self.e}

    def ws(self) -> CollisionWorkspace:
        if self.workspace is None:
            self.workspace = CollisionWorkspace(self.table)
        return self.workspace


def init_state(G, frame: FrameState, stats: ParticleStatistics, table: KernelTable, dt: float, c: float = 1.0,
               rescale: bool = False, workspace: CollisionWorkspace | None = None) -> SimState:
    g = np.asarray(getattr(G, "phys", G), dtype=float)
    m = grid_moments(g, frame, table.grid)
    return SimState(0, 0.0, g, frame, m["rho"], m["rho"] * m["u"], m["rho"] * m["e"], stats, table, dt, c,
                    rescale, workspace=workspace)


def collision_rate(state: SimState) -> np.ndarray:
    """``dG/dt`` from collisions, i.e. ``c_pre Q`` at the current frame."""
    ws = state.ws()
    ws.alpha_eff, ws.c_pre = scale_factors(state.frame, state.stats, state.table.gamma, state.c)
    try:
        return assemble_Q(ws, G=state.G)
    except BlowUpError as exc:
        exc.time = state.t
        raise


def euler_step(state: SimState) -> SimState:
    """One forward Euler step of the full scheme, frame update included."""
    if "blowup" in state.flags:
        raise ValueError("state is flagged as blown up")
    dt = state.dt
    grid = state.grid
    Q = collision_rate(state)
    flags = tuple(f for f in state.flags if f not in ("undetermined", "omega_floor"))
    if state.rescale:
        drho, dmom, dener = moment_rates(Q, state.frame, grid)
        rho = state.rho + dt * drho
        mom = state.mom + dt * dmom
        energy = state.energy + dt * dener
        u_new = mom / rho
        upd = update_omega({"rho": rho, "u": u_new, "e": energy / rho}, state.stats, state.frame.omega)
        flags += upd.flags
        om_rate = (upd.omega - state.frame.omega) / dt
        u_rate = (u_new - state.frame.u) / dt
        div = divergence_term(SpectralField(grid, phys=state.G), state.frame, om_rate, u_rate, grid)
        G = state.G + dt * (Q - div)
        frame = state.frame.with_(omega=upd.omega, u=u_new)
        T, z = upd.T, upd.z
    else:
        G = state.G + dt * Q
        frame = state.frame
        m = grid_moments(G, frame, grid)
        rho, mom, energy = m["rho"], m["rho"] * m["u"], m["rho"] * m["e"]
        T, z = state.T, state.z
    if not np.all(np.isfinite(G)):
        raise BlowUpError("non-finite distribution", math.inf, state.t + dt)
    return replace(state, step=state.step + 1, t=state.t + dt, G=G, frame=frame, rho=rho, mom=mom,
                   energy=energy, flags=flags, T=T, z=z, last_Q=Q)


def average_states(a: SimState, b: SimState) -> SimState:
    """Linear average of ``G``, frame and moment unknowns (Heun combination)."""
    frame = a.frame.with_(omega=0.5 * (a.frame.omega + b.frame.omega), u=0.5 * (a.frame.u + b.frame.u))
    T = None if a.T is None or b.T is None else 0.5 * (a.T + b.T)
    return replace(b, G=0.5 * (a.G + b.G), frame=frame, rho=0.5 * (a.rho + b.rho), mom=0.5 * (a.mom + b.mom),
                   energy=0.5 * (a.energy + b.energy), T=T, flags=tuple(dict.fromkeys(a.flags + b.flags)))


def rk2_ssp_step(state: SimState) -> SimState:
    """Heun / SSP-RK2: two Euler stages, each with its own frame, then averaged."""
    s1 = euler_step(state)
    s2 = euler_step(s1)
    out = average_states(state, s2)
    out.step = state.step + 1
    out.t = state.t + state.dt
    # collision rate at the start of the step
    out.last_Q = s1.last_Q
    return out


@dataclass
class RunRecord:
    """Time series, snapshots and the termination status of a run."""

    series: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    status: str = "completed"
    blowup_time: Optional[float] = None
    message: str = ""
    final: Optional[SimState] = None


def run(state: SimState, t_final: float, integrator: str = "rk2ssp", record_every: int = 1,
        diagnose: Callable[[SimState], dict] | None = None, snapshot_times=(),
        snapshot: Callable[[SimState], object] | None = None) -> RunRecord:
    """Advance ``state`` to ``t_final`` or until blow-up.

    Parameters
    ----------
    diagnose : callable, optional
        Maps a state to one series record; called at step 0 and every
        ``record_every`` steps.
    snapshot_times : sequence of float
        Times at which ``snapshot(state)`` is stored (first step at or after).
    """
    step_fn = {"euler": euler_step, "rk2ssp": rk2_ssp_step}[integrator]
    rec = RunRecord()
    pending = sorted(snapshot_times)
    nsteps = int(round(t_final / state.dt))

    def emit(s):
        if diagnose is not None:
            rec.series.append(diagnose(s))
        while pending and s.t >= pending[0] - 1e-12 and snapshot is not None:
            rec.snapshots.append((pending.pop(0), snapshot(s)))

    emit(state)
    for _ in range(nsteps):
        try:
            new = step_fn(state)
        except BlowUpError as exc:
            rec.status = "blowup"
            rec.blowup_time = exc.time if exc.time is not None else state.t
            rec.message = str(exc)
            state.flags = state.flags + ("blowup",)
            if diagnose is not None:
                rec.series.append(diagnose(state))
            break
        state = new
        if state.step % record_every == 0:
            emit(state)
    rec.final = state
    return rec
