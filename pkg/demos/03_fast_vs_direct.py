"""
Fast operator against the literal sums
======================================

Every piece of the collision operator computed with the FFT algorithm is
compared with the direct O(n^{3d}) sums on a tiny grid.
"""

import numpy as np

from bne.collision import CollisionWorkspace, collision_pieces, direct_pieces
from bne.grid import build_grid, ifft_c
from bne.kernels import build_hardsphere3d, build_maxwell2d

rng = np.random.default_rng(0)
for table in (build_maxwell2d(build_grid(2, 8, 4.0), 4), build_hardsphere3d(build_grid(3, 8, 4.0), 2, 2)):
    G = rng.random(table.grid.shape)
    fast = collision_pieces(CollisionWorkspace(table), G)
    ref = direct_pieces(table, G, G, G)
    for name in ref:
        b = ifft_c(ref[name])
        print(f"{table.kernel_id:>12} {name}: relative difference {np.abs(fast[name] - b).max() / np.abs(b).max():.2e}")
