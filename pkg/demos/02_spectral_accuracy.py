"""
Spectral accuracy of the collision operator
===========================================

The operator applied to the discrete limit state should vanish up to the
truncation error, which decays spectrally with the grid size when the
velocity frame follows the thermal speed.
"""

from bne import preset_residual, residual_run

# 2D Fermi gas, sigma = 0.5, box half-width 4, with and without rescaling
for cid in ("residual.fd2d.sigma05.L4", "residual.fd2d.sigma05.L4.norescale"):
    case = preset_residual(cid)
    print(cid)
    for n in (16, 32, 64):
        row = residual_run(case, n)
        print(f"  n = {n:3d}  residual = {row.residual:.3e}  (reference {row.reference:.3e})  {row.seconds:.1f} s")

# 3D hard spheres on a small grid with two quadrature points per angle
row = residual_run(preset_residual("residual.fd3d.sigma05.L4", M1=2, M2=2), 16)
print(f"3D Fermi n = 16: residual = {row.residual:.3e} (reference {row.reference:.3e})")
