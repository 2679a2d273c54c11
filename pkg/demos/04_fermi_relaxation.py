"""
Relaxation of a 2D Fermi gas
============================

A uniform ball relaxes towards the quantum Maxwellian with the same mass
and energy.  Above the threshold hbar* no regular limit exists and the
run stops on the blow-up guard.
"""

from bne import preset_relaxation, run_config

# short, coarse run: the l1 distance to the limit state drops quickly
cfg = preset_relaxation("relax.fd2d.ball.r05", n=32, t_final=5.0, record_every=4)
s, rec = run_config(cfg, snapshot=False)
print(f"hbar = {s.stats.hbar:.5f} (hbar* = {s.hbar_star:.5f})")
for x in rec.series:
    print(f"t = {x['t']:5.2f}  rho = {x['rho']:.12f}  entropy = {x['entropy']:.6f}  "
          f"||f - f_inf||_1 = {x['relax_err']:.3e}")

# above the threshold
s, rec = run_config(preset_relaxation("relax.fd2d.ball.r105", n=32, t_final=20.0, record_every=8), snapshot=False)
print(f"r = 1.05: status {rec.status}, t = {rec.blowup_time}")
