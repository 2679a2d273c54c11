"""Run configuration, experiment presets and data output.

A configuration is a line-oriented ``key = value`` text.  Structured values
use call syntax, e.g.::

    dim = 2
    n = 64
    L = 8
    kernel = maxwell2d
    stats = fermi_r(0.5)
    ic = ball_indicator(rho=1, e=1)
    integrator = rk2ssp
    dt = 0.25
    t_final = 30

Presets are addressed by stable ids such as ``residual.fd2d.sigma05.L4`` or
``relax.fd2d.ball.r05``.
"""

from __future__ import annotations

import ast
import csv
import hashlib
import json
import math
import os
import re
from dataclasses import asdict, dataclass, replace
from typing import Any, Callable, Optional

import numpy as np

from .collision import CollisionWorkspace, assemble_Q
from .diagnostics import (entropy_classical, entropy_quantum, lp_norm, moments, physical,
                          relaxation_error)
from .equilibrium import classify, discretize
from .grid import GridSpec, SpectralField, build_grid
from .integrate import RunRecord, SimState, init_state, run
from .kernels import (KernelTable, build_hardsphere3d, build_maxwell2d, build_vhs_quadrature, load_table,
                      vhs_params)
from .quantum import CLASSICAL, FERMI, BOSE, ParticleStatistics, hbar_star, solve_from_mass_temperature
from .rescaling import (FrameState, cell_volume, classical_frame, rescaled_frame, scale_factors, to_rescaled,
                        velocity_nodes)


class ConfigError(ValueError):
    """Invalid configuration, with the 1-based line and column of the fault."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class SimConfig:
    """Everything a run needs.

    ``stats`` is ``classical``, ``fermi``, ``bose``; ``hbar`` is either
    given directly or resolved as ``r * hbar*`` from the discrete moments of
    the initial datum.  ``ic`` is ``ball_indicator``,
    ``classical_maxwellian`` or ``quantum_maxwellian`` with the parameters
    ``ic_rho``, ``ic_u``, ``ic_e`` (ball) and ``ic_sigma`` (maxwellians,
    the temperature).
    """

    dim: int = 2
    n: int = 32
    L: float = 8.0
    trunc_ratio: float = 1.0
    kernel: str = "maxwell2d"
    gamma: float = 0.0
    C_phi: float = 1.0
    M: int = 8
    M1: int = 4
    M2: int = 4
    theta_rule: str = "gauss"
    quad_order: int = 64
    stats: str = FERMI
    hbar: Optional[float] = None
    r: Optional[float] = None
    rescaling: bool = False
    integrator: str = "rk2ssp"
    dt: float = 0.025
    t_final: float = 1.0
    c: float = 1.0
    ic: str = "ball_indicator"
    ic_rho: float = 1.0
    ic_u: tuple = ()
    ic_e: float = 1.0
    ic_sigma: float = 1.0
    record_every: int = 1
    snapshot_times: tuple = ()
    deterministic: bool = True
    threads: int = 1
    blowup_bound: float = 1e6
    hbar_moments: str = "discrete"
    kernel_cache: str = ""
    preset: str = ""

    def u0(self) -> np.ndarray:
        return np.zeros(self.dim) if not self.ic_u else np.asarray(self.ic_u, dtype=float)


# keys that never change the numbers produced by a run
_HASH_EXCLUDE = ("threads", "kernel_cache")


def config_hash(cfg: SimConfig) -> str:
    """SHA-256 of the canonical JSON form of the numerically relevant fields."""
    d = {k: v for k, v in asdict(cfg).items() if k not in _HASH_EXCLUDE}
    d["ic_u"] = [float(x) for x in cfg.u0()]
    d["snapshot_times"] = [float(x) for x in d["snapshot_times"]]
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- parsing

_BOOL = {"true": True, "on": True, "yes": True, "1": True, "false": False, "off": False, "no": False, "0": False}
_SCALAR_KEYS = {
    "dim": int, "n": int, "L": float, "trunc_ratio": float, "M": int, "M1": int, "M2": int,
    "theta_rule": str, "quad_order": int, "rescaling": bool, "integrator": str, "dt": float,
    "t_final": float, "c": float, "record_every": int, "snapshot_times": tuple, "deterministic": bool,
    "threads": int, "blowup_bound": float, "kernel_cache": str, "C_phi": float, "hbar_moments": str,
}
_CALL_KEYS = ("kernel", "stats", "ic")
_IC_ARGS = {
    "ball_indicator": ("rho", "u", "e"),
    "classical_maxwellian": ("rho", "u", "sigma"),
    "quantum_maxwellian": ("rho", "u", "sigma"),
}


def _parse_call(text: str, line: int, col: int):
    """``name`` or ``name(a, k=v)`` with literal arguments."""
    try:
        node = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse {text.strip()!r}", line, col + (exc.offset or 1) - 1) from None
    if isinstance(node, ast.Name):
        return node.id, [], {}
    if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)):
        raise ConfigError(f"expected name or name(...), got {text.strip()!r}", line, col)
    try:
        args = [ast.literal_eval(a) for a in node.args]
        kw = {k.arg: ast.literal_eval(k.value) for k in node.keywords}
    except ValueError:
        raise ConfigError("arguments must be literals", line, col) from None
    return node.func.id, args, kw


def _scalar(key: str, raw: str, line: int, col: int):
    typ = _SCALAR_KEYS[key]
    s = raw.strip()
    try:
        if typ is bool:
            return _BOOL[s.lower()]
        if typ is tuple:
            return tuple(float(x) for x in re.split(r"[,\s]+", s) if x)
        if typ is str:
            return s
        return typ(s)
    except (KeyError, ValueError):
        raise ConfigError(f"invalid value {s!r} for {key} ({typ.__name__})", line, col) from None


def _apply_call(key: str, value: str, line: int, col: int, out: dict) -> None:
    name, args, kw = _parse_call(value, line, col)
    if key == "kernel":
        if name in ("maxwell2d", "hardsphere3d"):
            if args or set(kw) - {"C_phi"}:
                raise ConfigError(f"{name} takes only C_phi", line, col)
            out["kernel"] = name
            out["gamma"] = 0.0 if name == "maxwell2d" else 1.0
        elif name == "vhs":
            vals = dict(zip(("gamma", "C_phi"), args))
            vals.update(kw)
            if "gamma" not in vals or set(vals) - {"gamma", "C_phi"}:
                raise ConfigError("vhs needs gamma and optionally C_phi", line, col)
            out["kernel"] = "vhs"
            out["gamma"] = float(vals["gamma"])
            kw = {k: v for k, v in vals.items() if k == "C_phi"}
        else:
            raise ConfigError(f"unknown kernel {name!r}", line, col)
        if "C_phi" in kw:
            out["C_phi"] = float(kw["C_phi"])
    elif key == "stats":
        if name == CLASSICAL:
            if args or kw:
                raise ConfigError("classical takes no arguments", line, col)
            out.update(stats=CLASSICAL, hbar=None, r=None)
        elif name in (FERMI, BOSE):
            vals = dict(zip(("hbar",), args)) | kw
            if set(vals) != {"hbar"}:
                raise ConfigError(f"{name} needs hbar", line, col)
            out.update(stats=name, hbar=float(vals["hbar"]), r=None)
        elif name in ("fermi_r", "bose_r"):
            vals = dict(zip(("r",), args)) | kw
            if set(vals) != {"r"}:
                raise ConfigError(f"{name} needs r", line, col)
            out.update(stats=name[:-2], hbar=None, r=float(vals["r"]))
        else:
            raise ConfigError(f"unknown statistics {name!r}", line, col)
    else:
        if name not in _IC_ARGS:
            raise ConfigError(f"unknown initial datum {name!r}", line, col)
        allowed = _IC_ARGS[name]
        vals = dict(zip(allowed, args)) | kw
        bad = set(vals) - set(allowed)
        if bad:
            raise ConfigError(f"{name} does not take {sorted(bad)}", line, col)
        out["ic"] = name
        for k, v in vals.items():
            if k == "u":
                out["ic_u"] = tuple(float(x) for x in np.atleast_1d(v))
            else:
                out["ic_" + k] = float(v)


def parse_config(text: str) -> SimConfig:
    """Parse a ``key = value`` configuration; ``#`` starts a comment."""
    out: dict[str, Any] = {}
    where: dict[str, tuple] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", ln, len(body) - len(body.lstrip()) + 1)
        key_part, val_part = body.split("=", 1)
        key = key_part.strip()
        kcol = len(key_part) - len(key_part.lstrip()) + 1
        vcol = len(key_part) + 2 + len(val_part) - len(val_part.lstrip())
        if not val_part.strip():
            raise ConfigError(f"missing value for {key!r}", ln, vcol)
        if key in where:
            raise ConfigError(f"duplicate key {key!r} (first on line {where[key][0]})", ln, kcol)
        if key in _CALL_KEYS:
            _apply_call(key, val_part, ln, vcol, out)
        elif key in _SCALAR_KEYS:
            out[key] = _scalar(key, val_part, ln, vcol)
        else:
            raise ConfigError(f"unknown key {key!r}", ln, kcol)
        where[key] = (ln, vcol)
    return validate(SimConfig(**out), where)


def validate(cfg: SimConfig, where: dict | None = None) -> SimConfig:
    """Cross-field checks; returns ``cfg`` unchanged when consistent."""
    where = where or {}

    def fail(msg, key):
        ln, col = where.get(key, (0, 0))
        raise ConfigError(msg, ln, col)

    if cfg.dim not in (2, 3):
        fail(f"dim must be 2 or 3, got {cfg.dim}", "dim")
    if cfg.n < 4 or cfg.n % 2:
        fail(f"n must be even and >= 4, got {cfg.n}", "n")
    if not cfg.L > 0:
        fail("L must be positive", "L")
    if cfg.trunc_ratio < 1:
        fail("trunc_ratio must be >= 1", "trunc_ratio")
    if cfg.kernel == "maxwell2d" and cfg.dim != 2:
        fail("maxwell2d needs dim = 2", "kernel")
    if cfg.kernel == "hardsphere3d" and cfg.dim != 3:
        fail("hardsphere3d needs dim = 3", "kernel")
    if cfg.theta_rule not in ("rectangle", "gauss"):
        fail("theta_rule must be rectangle or gauss", "theta_rule")
    if cfg.hbar_moments not in ("discrete", "exact"):
        fail("hbar_moments must be discrete or exact", "hbar_moments")
    if cfg.integrator not in ("euler", "rk2ssp"):
        fail("integrator must be euler or rk2ssp", "integrator")
    if not cfg.dt > 0 or cfg.t_final < 0:
        fail("dt must be positive and t_final nonnegative", "dt")
    if cfg.record_every < 1:
        fail("record_every must be >= 1", "record_every")
    if cfg.ic_u and len(cfg.ic_u) != cfg.dim:
        fail(f"ic u has {len(cfg.ic_u)} components for dim = {cfg.dim}", "ic")
    if cfg.ic_rho <= 0 or cfg.ic_e <= 0 or cfg.ic_sigma <= 0:
        fail("initial rho, e and sigma must be positive", "ic")
    if cfg.stats != CLASSICAL and cfg.hbar is None and cfg.r is None:
        fail("quantum statistics need hbar or r", "stats")
    if cfg.r is not None:
        if not cfg.r > 0:
            fail("r must be positive", "stats")
        if cfg.ic == "quantum_maxwellian":
            fail("r-form hbar cannot be combined with a quantum_maxwellian initial datum", "stats")
        if cfg.stats == BOSE and cfg.dim == 2:
            fail("2D Bose particles have no threshold hbar*; give hbar", "stats")
    if cfg.ic == "quantum_maxwellian" and cfg.stats == CLASSICAL:
        fail("quantum_maxwellian needs quantum statistics", "ic")
    return cfg


# ---------------------------------------------------------------- building blocks


def build_table(cfg: SimConfig, grid: GridSpec) -> KernelTable:
    """Kernel table for ``cfg``, read from ``cfg.kernel_cache`` when it exists."""
    if cfg.kernel_cache and os.path.exists(cfg.kernel_cache):
        tab = load_table(cfg.kernel_cache)
        g = tab.grid
        if (g.dim, g.n, g.half_width_L, g.trunc_ratio) != (grid.dim, grid.n, grid.half_width_L, grid.trunc_ratio):
            raise ConfigError(f"kernel cache {cfg.kernel_cache} was built for another grid")
        return tab
    if cfg.kernel == "maxwell2d":
        return build_maxwell2d(grid, cfg.M, cfg.C_phi)
    if cfg.kernel == "hardsphere3d":
        return build_hardsphere3d(grid, cfg.M1, cfg.M2, cfg.C_phi, theta_rule=cfg.theta_rule)
    return build_vhs_quadrature(grid, vhs_params(cfg.dim, cfg.gamma, cfg.C_phi), cfg.quad_order, cfg.M,
                                cfg.M1, cfg.M2, theta_rule=cfg.theta_rule)


def ball_radius(dim: int, e: float) -> float:
    """Radius of the uniform ball with energy ``e``: ``sqrt(2 e (d + 2) / d)``."""
    return math.sqrt(2.0 * e * (dim + 2) / dim)


def initial_values(cfg: SimConfig, V, stats: ParticleStatistics | None = None) -> np.ndarray:
    """Initial datum evaluated at the nodes ``V``."""
    u0 = cfg.u0()
    d = cfg.dim
    r2 = sum((V[i] - u0[i]) ** 2 for i in range(d))
    if cfg.ic == "ball_indicator":
        A = ball_radius(d, cfg.ic_e)
        vol = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * A**d
        return np.where(r2 < A * A, cfg.ic_rho / vol, 0.0)
    T = cfg.ic_sigma
    if cfg.ic == "classical_maxwellian":
        return cfg.ic_rho * (2.0 * math.pi * T) ** (-d / 2.0) * np.exp(-r2 / (2.0 * T))
    z = solve_from_mass_temperature(stats, cfg.ic_rho, T).z
    a = abs(stats.alpha())
    x = r2 / (2.0 * T) - math.log(z)
    if stats.kind == FERMI:
        return np.exp(-np.logaddexp(0.0, x)) / a
    return 1.0 / a / np.expm1(x)


def initial_frame(cfg: SimConfig) -> FrameState:
    if cfg.rescaling:
        return rescaled_frame(1.0, cfg.u0(), cfg.L)
    return classical_frame(cfg.dim, cfg.L)


@dataclass
class Setup:
    """A resolved configuration: grid, table, statistics and initial state."""

    cfg: SimConfig
    grid: GridSpec
    table: KernelTable
    stats: ParticleStatistics
    state: SimState
    moments0: dict
    hbar_star: Optional[float]
    f_inf: Optional[Callable[[FrameState], np.ndarray]] = None


def exact_moments(cfg: SimConfig) -> tuple[float, float]:
    """``(rho, e)`` of the continuous initial datum."""
    if cfg.ic == "ball_indicator":
        return cfg.ic_rho, cfg.ic_e
    if cfg.ic == "classical_maxwellian":
        return cfg.ic_rho, 0.5 * cfg.dim * cfg.ic_sigma
    stats = ParticleStatistics(cfg.stats, cfg.hbar, cfg.dim)
    return cfg.ic_rho, solve_from_mass_temperature(stats, cfg.ic_rho, cfg.ic_sigma).e


def resolve_stats(cfg: SimConfig, rho: float, e: float) -> tuple[ParticleStatistics, Optional[float]]:
    """Statistics with ``hbar`` resolved.

    ``rho, e`` are the discrete moments of the sampled datum; with
    ``hbar_moments = exact`` the threshold uses the continuous ones instead.
    """
    if cfg.stats == CLASSICAL:
        return ParticleStatistics(CLASSICAL, 1.0, cfg.dim), None
    if cfg.hbar_moments == "exact":
        rho, e = exact_moments(cfg)
    hs = hbar_star(cfg.stats, cfg.dim, rho, e)
    if cfg.r is not None:
        if hs is None:
            raise ConfigError(f"no threshold hbar* for {cfg.stats} in {cfg.dim}D")
        return ParticleStatistics(cfg.stats, cfg.r * hs, cfg.dim), hs
    return ParticleStatistics(cfg.stats, cfg.hbar, cfg.dim), hs


def setup(cfg: SimConfig, table: KernelTable | None = None) -> Setup:
    """Grid, kernel table, statistics and initial ``SimState`` for ``cfg``."""
    validate(cfg)
    grid = build_grid(cfg.dim, cfg.n, cfg.L, cfg.trunc_ratio)
    table = table if table is not None else build_table(cfg, grid)
    frame = initial_frame(cfg)
    V = velocity_nodes(grid, frame)
    provisional = None if cfg.ic != "quantum_maxwellian" else ParticleStatistics(cfg.stats, cfg.hbar, cfg.dim)
    G0 = to_rescaled(initial_values(cfg, V, provisional), frame, grid).phys
    m0 = moments(G0, frame, grid)
    if cfg.r is not None and cfg.hbar_moments == "discrete" and not (m0["rho"] > 0 and m0["e"] > 0):
        raise ConfigError(f"the grid does not resolve the initial datum (rho_h = {m0['rho']:.3g}, "
                          f"e_h = {m0['e']:.3g}); refine n or use hbar_moments = exact")
    stats, hs = resolve_stats(cfg, m0["rho"], m0["e"])
    ws = CollisionWorkspace(table, workers=cfg.threads, blowup_bound=cfg.blowup_bound)
    state = init_state(G0, frame, stats, table, cfg.dt, cfg.c, cfg.rescaling, workspace=ws)
    # no limit state for a datum the grid does not see
    eq = classify(m0, stats) if m0["rho"] > 0 and m0["e"] > 0 else None

    def f_inf(fr: FrameState):
        if eq is None or eq.variant == "Undetermined":
            return None
        f = physical(discretize(eq, grid, fr).phys, fr, grid)[0]
        if eq.variant == "Condensate3D":
            # the node carrying the point mass is left out of the comparison
            V = velocity_nodes(grid, fr)
            r2 = sum((V[i] - eq.u[i]) ** 2 for i in range(grid.dim))
            f = np.where(r2 == r2.min(), np.nan, f)
        return f

    return Setup(cfg, grid, table, stats, state, m0, hs, f_inf)


def diagnostics_record(st: SimState, s: Setup) -> dict:
    """One series record in physical variables."""
    grid, fr = s.grid, st.frame
    f, _, dv = physical(st.G, fr, grid)
    m = moments(st.G, fr, grid)
    if s.stats.kind == CLASSICAL:
        ent, defined = entropy_classical(st.G, fr, grid), True
    else:
        rep = entropy_quantum(st.G, fr, grid, s.stats)
        ent, defined = rep.value, rep.defined
    rec = {
        "step": st.step, "t": st.t, "rho": m["rho"], "u": m["u"].tolist(), "e": m["e"], "Ec": m["Ec"],
        "entropy": ent if defined else None, "entropy_defined": defined,
        "lp1": lp_norm(st.G, fr, grid, 1), "lp2": lp_norm(st.G, fr, grid, 2),
        "linf": lp_norm(st.G, fr, grid, np.inf), "max_f": float(f.max()),
        "omega": fr.omega, "flags": list(st.flags),
    }
    if st.last_Q is not None:
        rec["residual"] = float(fr.mu * fr.scale**grid.dim * np.abs(st.last_Q).max())
    finf = s.f_inf(fr) if s.f_inf is not None else None
    if finf is not None:
        ok = np.isfinite(finf)
        rec["relax_err"] = relaxation_error(f[ok], finf[ok], dv)
    return rec


def run_config(cfg: SimConfig, table: KernelTable | None = None, snapshot: bool = True) -> tuple[Setup, RunRecord]:
    """Build and run ``cfg``; snapshots hold ``(G, frame)`` pairs."""
    s = setup(cfg, table)
    rec = run(s.state, cfg.t_final, cfg.integrator, cfg.record_every,
              diagnose=lambda st: diagnostics_record(st, s), snapshot_times=cfg.snapshot_times,
              snapshot=(lambda st: (st.G.copy(), st.frame)) if snapshot else None)
    return s, rec


# ---------------------------------------------------------------- residual presets

# reference residuals (u0 = 0 unless the id says ub), keyed by id then n
RESIDUAL_REFERENCE = {
    "residual.fd2d.sigma05.L4": {16: 7.54518e-04, 32: 5.45433e-06, 64: 2.16212e-09, 128: 8.72616e-15},
    "residual.fd2d.sigma05.L4.norescale": {16: 2.40084e-02, 32: 2.94865e-04, 64: 6.57029e-08, 128: 2.25632e-09},
    "residual.fd2d.sigma05.L4.ub": {16: 7.54292e-04, 32: 6.33224e-06, 64: 2.16212e-09},
    "residual.fd2d.sigma05.L4.ub.norescale": {16: 3.02826e-02, 32: 1.61790e-04, 64: 1.05112e-08},
    "residual.fd2d.sigma05.L6": {16: 1.23417e-02, 32: 2.52998e-04, 64: 6.98180e-07},
    "residual.fd2d.sigma05.L6.norescale": {16: 7.02218e-02, 32: 8.61508e-04, 64: 4.98332e-07},
    "residual.fd2d.sigma05.L8": {16: 1.41403e-02, 32: 1.28337e-03, 64: 1.39047e-05},
    "residual.fd2d.sigma05.L8.norescale": {16: 4.56558e-01, 32: 1.18105e-02, 64: 3.52678e-05},
    "residual.be2d.sigma1.L4": {16: 8.75850e-02, 32: 4.34564e-03, 64: 6.97576e-06},
    "residual.be2d.sigma1.L4.norescale": {16: 4.77941e+00, 32: 1.34244e-01, 64: 7.27236e-05},
    "residual.fd3d.sigma05.L4": {16: 6.65068e-04, 32: 1.38282e-05, 64: 4.02472e-09},
    "residual.fd3d.sigma05.L4.norescale": {16: 2.64044e-01, 32: 3.51620e-03},
    "residual.fd3d.sigma1.L4": {16: 9.28576e-04, 32: 5.11585e-05},
    "residual.fd3d.sigma1.L4.norescale": {16: 4.02042e-02, 32: 8.89902e-05},
    "residual.be3d.sigma1.rho05.L4": {16: 4.85493e-02, 32: 6.60721e-04},
}

_RES_ID = re.compile(r"^residual\.(fd|be)(2|3)d\.sigma(\d+)(?:\.rho(\d+))?\.L(\d+(?:p\d+)?)((?:\.ub)?)((?:\.norescale)?)$")


def _digits(s: str) -> float:
    """``05 -> 0.5``, ``1 -> 1``, ``105 -> 1.05``: first digit, then decimals."""
    return float(s[0] + ("." + s[1:] if len(s) > 1 else ""))


@dataclass(frozen=True)
class ResidualCase:
    """One spectral-accuracy case: a quantum Maxwellian and its discrete limit state."""

    case_id: str
    kind: str
    dim: int
    sigma: float
    rho: float
    L: float
    u0: tuple
    rescaling: bool
    hbar: float = 3.0
    M: int = 8
    M1: int = 4
    M2: int = 4
    theta_rule: str = "gauss"
    C_phi: float = 1.0
    c: float = 1.0

    def config(self, n: int) -> SimConfig:
        kernel = "maxwell2d" if self.dim == 2 else "hardsphere3d"
        return SimConfig(dim=self.dim, n=n, L=self.L, kernel=kernel, gamma=0.0 if self.dim == 2 else 1.0,
                         C_phi=self.C_phi, M=self.M, M1=self.M1, M2=self.M2, theta_rule=self.theta_rule,
                         stats=self.kind, hbar=self.hbar, rescaling=self.rescaling, c=self.c,
                         ic="quantum_maxwellian", ic_rho=self.rho, ic_u=self.u0, ic_sigma=self.sigma,
                         preset=self.case_id)


def preset_residual(case_id: str, **overrides) -> ResidualCase:
    """Parse a residual preset id such as ``residual.fd2d.sigma05.L4[.ub][.norescale]``.

    ``ub`` selects the off-grid mean velocity ``8 / (3 sqrt 2 + 2) (1, 1)``
    (2D only).  Keyword overrides replace case fields (e.g. ``M``).
    """
    m = _RES_ID.match(case_id)
    if not m:
        raise ConfigError(f"unknown residual preset {case_id!r}")
    kind = FERMI if m.group(1) == "fd" else BOSE
    dim = int(m.group(2))
    sigma = _digits(m.group(3))
    rho = _digits(m.group(4)) if m.group(4) else 1.0
    L = float(m.group(5).replace("p", "."))
    if m.group(6):
        if dim != 2:
            raise ConfigError("the ub mean velocity is defined for 2D cases only")
        u0 = (8.0 / (3.0 * math.sqrt(2.0) + 2.0),) * 2
    else:
        u0 = (0.0,) * dim
    case = ResidualCase(case_id, kind, dim, sigma, rho, L, u0, rescaling=not m.group(7))
    return replace(case, **overrides)


@dataclass
class ResidualRow:
    """One table row: the residual ``max |Q(f_h_inf)|`` in physical variables."""

    case_id: str
    n: int
    residual: float
    residual_G: float
    T_h: float
    z_h: float
    rho_h: float
    e_h: float
    reference: Optional[float]
    nan_hazard: bool
    seconds: float

    def as_dict(self) -> dict:
        return asdict(self)


def residual_run(case: ResidualCase, n: int, table: KernelTable | None = None, threads: int = 1) -> ResidualRow:
    """Residual of the collision operator at the discrete limit state.

    The limit-state candidate is sampled on the unit frame, its discrete
    moments give ``(T_h, z_h)`` (with ``u_h = u0`` when rescaling), and the
    limit state is rebuilt on the frame ``omega = sqrt(T_h)`` (rescaled) or
    the fixed box frame.  The residual is ``max |df/dt|`` with
    ``df/dt = mu s^d c_pre Q(G)``; ``residual_G`` is ``max |c_pre Q(G)|``.
    """
    import time

    t0 = time.perf_counter()
    cfg = case.config(n)
    grid = build_grid(case.dim, n, case.L, 1.0)
    table = table if table is not None else build_table(cfg, grid)
    stats = ParticleStatistics(case.kind, case.hbar, case.dim)
    u0 = np.asarray(case.u0, dtype=float)
    frame0 = rescaled_frame(1.0, u0, case.L) if case.rescaling else classical_frame(case.dim, case.L)
    f0 = initial_values(cfg, velocity_nodes(grid, frame0), stats)
    G0 = to_rescaled(f0, frame0, grid).phys
    m = moments(G0, frame0, grid)
    if case.rescaling:
        # mean velocity snapped to the exact one; e recomputed about it
        V = velocity_nodes(grid, frame0)
        e = 0.5 * float(np.sum(sum((V[i] - u0[i]) ** 2 for i in range(case.dim)) * f0)) \
            * cell_volume(grid, frame0) / m["rho"]
        m = {"rho": m["rho"], "u": u0, "e": e}
    eq = classify(m, stats)
    if case.rescaling:
        frame = rescaled_frame(math.sqrt(eq.T), u0, case.L)
    else:
        frame = frame0
    Gf = discretize(eq, grid, frame)
    hazard = bool(Gf.meta.get("nan_hazard"))
    if hazard:
        res = resG = math.nan
    else:
        ws = CollisionWorkspace(table, workers=threads)
        ws.alpha_eff, ws.c_pre = scale_factors(frame, stats, table.gamma, case.c)
        Q = assemble_Q(ws, G=np.asarray(Gf.phys).real)
        resG = float(np.abs(Q).max())
        res = float(frame.mu * frame.scale**case.dim * resG)
    ref = RESIDUAL_REFERENCE.get(case.case_id, {}).get(n)
    return ResidualRow(case.case_id, n, res, resG, float(eq.T), float(eq.z) if eq.z is not None else math.nan,
                       m["rho"], m["e"], ref, hazard, time.perf_counter() - t0)


# ---------------------------------------------------------------- relaxation presets

_REL_ID = re.compile(r"^relax\.(fd|be)(2|3)d\.(ball|maxw)\.r(\d+)$")

# desk-scale grids and steps; the full-scale values are n = 128 (2D), 32 (3D), dt = 0.025
DESK = {2: {"n": 64, "dt": 0.25, "M": 8}, 3: {"n": 16, "dt": 0.0125, "M1": 2, "M2": 2, "t_final": 1.0}}
FULL = {2: {"n": 128, "dt": 0.025, "M": 8}, 3: {"n": 32, "dt": 0.025, "M1": 4, "M2": 4, "t_final": 10.0}}


def preset_relaxation(case_id: str, scale: str = "desk", **overrides) -> SimConfig:
    """Configuration of a relaxation experiment ``relax.{fd,be}{2,3}d.{ball,maxw}.r<digits>``.

    ``ball`` is the uniform ball with ``rho = 1, e = 1``; ``maxw`` the
    classical Maxwellian with ``rho = 1, sigma = 1``.  ``r<digits>`` gives
    ``hbar = r hbar*`` (``r05 = 0.5``, ``r105 = 1.05``).  2D runs use
    ``[-8, 8]^2``, 3D Bose ``[-6, 6]^3`` and 3D Fermi ``[-8, 8]^3``, all in
    the fixed box frame with RK2-SSP.  ``scale`` picks grid, step and final
    time from ``DESK`` (single-core budget) or ``FULL``; the 3D desk step is
    small because the Bose cubic terms at ``r > 1`` are stiff.
    """
    m = _REL_ID.match(case_id)
    if not m:
        raise ConfigError(f"unknown relaxation preset {case_id!r}")
    kind = FERMI if m.group(1) == "fd" else BOSE
    dim = int(m.group(2))
    if kind == BOSE and dim == 2:
        raise ConfigError("2D Bose particles have no threshold hbar*")
    if scale not in ("desk", "full"):
        raise ConfigError("scale must be desk or full")
    grid_kw = dict((DESK if scale == "desk" else FULL)[dim])
    grid_kw.setdefault("t_final", 30.0)
    L = 6.0 if (kind == BOSE and dim == 3) else 8.0
    ic = "ball_indicator" if m.group(3) == "ball" else "classical_maxwellian"
    cfg = SimConfig(dim=dim, L=L, kernel="maxwell2d" if dim == 2 else "hardsphere3d",
                    gamma=0.0 if dim == 2 else 1.0, stats=kind, r=_digits(m.group(4)), rescaling=False,
                    integrator="rk2ssp", ic=ic, ic_rho=1.0, ic_e=1.0,
                    ic_sigma=1.0, record_every=1, preset=case_id, **grid_kw)
    cfg = replace(cfg, **overrides)
    return validate(cfg)


# ---------------------------------------------------------------- output

def _clean(x):
    """JSON-safe value: arrays to lists, non-finite floats to ``None``."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_series(records, path) -> None:
    """Write records as NDJSON, one object per line."""
    try:
        with open(path, "w") as fh:
            for r in records:
                fh.write(json.dumps(_clean(r), sort_keys=True, allow_nan=False) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write series to {path}: {exc}") from exc


def read_series(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _frame_dict(frame: FrameState) -> dict:
    return {"omega": frame.omega, "u": frame.u.tolist(), "mu": frame.mu, "lam": frame.lam,
            "half_width_L": frame.half_width_L}


def _grid_dict(grid: GridSpec) -> dict:
    return {"dim": grid.dim, "n": grid.n, "half_width_L": grid.half_width_L, "support_S": grid.support_S,
            "trunc_R": grid.trunc_R, "trunc_ratio": grid.trunc_ratio}


def write_snapshot(field: SpectralField | np.ndarray, frame: FrameState, path, grid: GridSpec | None = None,
                   config_id: str = "") -> None:
    """CSV of ``(v_1 .. v_d, f)`` at 17 significant digits plus ``path + '.json'`` metadata."""
    grid = grid if grid is not None else field.grid
    G = np.asarray(getattr(field, "phys", field)).real
    f, V, _ = physical(G, frame, grid)
    names = [f"v{i + 1}" for i in range(grid.dim)] + ["f"]
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            cols = [np.broadcast_to(v, grid.shape).ravel() for v in V] + [f.ravel()]
            for row in zip(*cols):
                w.writerow([f"{x:.17g}" for x in row])
        with open(str(path) + ".json", "w") as fh:
            json.dump(_clean({"frame": _frame_dict(frame), "grid": _grid_dict(grid), "config_hash": config_id}),
                      fh, sort_keys=True, indent=1)
    except OSError as exc:
        raise OSError(f"cannot write snapshot to {path}: {exc}") from exc


def read_snapshot(path) -> tuple[np.ndarray, np.ndarray, dict]:
    """``(nodes, f, meta)`` with nodes of shape ``(size, d)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    return data[:, :-1], data[:, -1], meta
