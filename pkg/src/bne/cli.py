"""Command line entry point ``bne``.

Exit codes: 0 success, 2 configuration error, 3 run terminated by blow-up
(data still written), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from . import experiments as ex
from .collision import CollisionWorkspace, assemble_Q, direct_Q_oracle
from .grid import build_grid
from .kernels import QuadratureError, save_table
from .quantum import BracketError, IterationCapError
from .rescaling import scale_factors

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("bne")


def _read_config(path: str) -> ex.SimConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ex.ConfigError(f"cannot read {path}: {exc}") from None
    return ex.parse_config(text)


def _write_run(s: ex.Setup, rec, out: str | None) -> None:
    if not out:
        return
    os.makedirs(out, exist_ok=True)
    h = ex.config_hash(s.cfg)
    ex.write_series(rec.series, os.path.join(out, "series.ndjson"))
    for t, (G, frame) in rec.snapshots:
        ex.write_snapshot(G, frame, os.path.join(out, f"snapshot_t{t:g}.csv"), grid=s.grid, config_id=h)
    summary = {"config_hash": h, "preset": s.cfg.preset, "status": rec.status, "blowup_time": rec.blowup_time,
               "message": rec.message, "hbar": s.stats.hbar, "hbar_star": s.hbar_star,
               "steps": rec.final.step if rec.final is not None else 0}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(ex._clean(summary), fh, indent=1, sort_keys=True)


def _report_run(s: ex.Setup, rec) -> int:
    last = rec.series[-1] if rec.series else {}
    print(f"status={rec.status} t={last.get('t')} max_f={last.get('max_f')} "
          f"entropy={last.get('entropy')} relax_err={last.get('relax_err')} hbar={s.stats.hbar:.6g}")
    if rec.status == "blowup":
        print(f"blow-up at t = {rec.blowup_time}: {rec.message}")
        return EXIT_BLOWUP
    return EXIT_OK


def cmd_residual(args) -> int:
    case = ex.preset_residual(args.preset, **({"M": args.M} if args.M else {}))
    rows = []
    print(f"{'n':>5} {'residual':>13} {'reference':>13} {'T_h':>10} {'z_h':>10} {'sec':>7}")
    for n in args.n:
        row = ex.residual_run(case, n, threads=args.threads)
        rows.append(row.as_dict())
        ref = f"{row.reference:.5e}" if row.reference else "-"
        print(f"{n:>5} {row.residual:>13.5e} {ref:>13} {row.T_h:>10.6f} {row.z_h:>10.5f} {row.seconds:>7.1f}"
              + ("  NaN hazard" if row.nan_hazard else ""))
    if args.out:
        ex.write_series(rows, args.out)
    return EXIT_OK


def cmd_relax(args) -> int:
    over = {k: v for k, v in (("n", args.n), ("dt", args.dt), ("t_final", args.t_final),
                              ("threads", args.threads), ("record_every", args.record_every)) if v is not None}
    cfg = ex.preset_relaxation(args.preset, scale=args.scale, **over)
    s, rec = ex.run_config(cfg)
    _write_run(s, rec, args.out)
    return _report_run(s, rec)


def cmd_run(args) -> int:
    cfg = _read_config(args.config)
    if args.threads:
        cfg = replace(cfg, threads=args.threads)
    s, rec = ex.run_config(cfg)
    _write_run(s, rec, args.out)
    return _report_run(s, rec)


def cmd_kernel_cache(args) -> int:
    cfg = _read_config(args.config)
    grid = build_grid(cfg.dim, cfg.n, cfg.L, cfg.trunc_ratio)
    path = args.path or cfg.kernel_cache
    if not path:
        raise ex.ConfigError("no output path: give --path or kernel_cache in the config")
    table = ex.build_table(replace(cfg, kernel_cache=""), grid)
    save_table(table, path)
    print(f"wrote {table.kernel_id} table, P = {table.count_P}, n = {grid.n}, to {path}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    """Compare the fast operator with the direct sums on the configured datum at small n."""
    cfg = _read_config(args.config)
    cfg = replace(cfg, n=args.n, kernel_cache="", hbar_moments="exact")
    s = ex.setup(cfg)
    ws = CollisionWorkspace(s.table)
    # the direct sums carry no prefactor
    ws.alpha_eff = scale_factors(s.state.frame, s.stats, s.table.gamma, 1.0)[0]
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for label, G in [("initial datum", s.state.G)] + [(f"random {i}", rng.random(s.grid.shape))
                                                      for i in range(args.samples)]:
        fast = assemble_Q(ws, G=G)
        ref = np.real(direct_Q_oracle(s.table, G, ws.alpha_eff))
        err = float(np.abs(fast - ref).max() / max(np.abs(ref).max(), 1e-300))
        worst = max(worst, err)
        print(f"{label:>14}: relative difference {err:.3e}")
    ok = worst <= args.tol
    print(("PASS" if ok else "FAIL") + f" worst {worst:.3e} (tol {args.tol:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bne", description="Fast spectral solver for the Boltzmann-Nordheim equation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("residual", help="collision residual at the discrete limit state")
    r.add_argument("preset", help="e.g. residual.fd2d.sigma05.L4[.norescale]")
    r.add_argument("--n", type=int, nargs="+", default=[16, 32, 64])
    r.add_argument("--M", type=int, default=None, help="directions (2D) or M1 = M2 (3D)")
    r.add_argument("--out", help="NDJSON file for the table rows")
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_residual)

    x = sub.add_parser("relax", help="relaxation preset, e.g. relax.fd2d.ball.r05")
    x.add_argument("preset")
    x.add_argument("--scale", choices=("desk", "full"), default="desk")
    x.add_argument("--n", type=int)
    x.add_argument("--dt", type=float)
    x.add_argument("--t-final", dest="t_final", type=float)
    x.add_argument("--record-every", dest="record_every", type=int)
    x.add_argument("--threads", type=int)
    x.add_argument("--out", help="output directory")
    x.set_defaults(func=cmd_relax)

    c = sub.add_parser("run", help="run a configuration file")
    c.add_argument("config")
    c.add_argument("--out", help="output directory")
    c.add_argument("--threads", type=int)
    c.set_defaults(func=cmd_run)

    k = sub.add_parser("kernel-cache", help="precompute and store the kernel table of a configuration")
    k.add_argument("config")
    k.add_argument("--path")
    k.set_defaults(func=cmd_kernel_cache)

    o = sub.add_parser("oracle", help="fast operator against the direct sums at small n")
    o.add_argument("config")
    o.add_argument("--n", type=int, default=8)
    o.add_argument("--samples", type=int, default=3)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--tol", type=float, default=1e-11)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BracketError, IterationCapError, QuadratureError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
