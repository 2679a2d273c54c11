"""
Quantum equilibria from mass and energy
=======================================

Fugacities, degeneracy and the threshold hbar* that separates regular
quantum Maxwellians from saturated or condensed limit states.
"""

import numpy as np

from bne import ParticleStatistics, classify, hbar_star, solve_from_mass_temperature

# fugacity of a 2D Fermi gas at rho = 1 for two temperatures
fermi2 = ParticleStatistics("fermi", 3.0, 2)
for T in (0.5, 1.0):
    sol = solve_from_mass_temperature(fermi2, 1.0, T)
    print(f"2D Fermi, T = {T}: z = {sol.z:.5f}, e = {sol.e:.5f}")

# the threshold depends only on the moments
print(f"hbar*(2D Fermi, rho=1, e=1)   = {hbar_star('fermi', 2, 1.0, 1.0):.5f}")
print(f"hbar*(3D Bose,  rho=1, e=1.5) = {hbar_star('bose', 3, 1.0, 1.5):.5f}")

# below the threshold the limit state is a regular quantum Maxwellian,
# above it a saturated indicator (Fermi) or a condensate (Bose, 3D)
hs = hbar_star("bose", 3, 1.0, 1.5)
for r in (0.5, 0.9, 1.05):
    st = classify({"rho": 1.0, "u": np.zeros(3), "e": 1.5}, ParticleStatistics("bose", r * hs, 3))
    extra = f", m0 = {st.m0:.4f}" if st.m0 else f", z = {st.z:.5f}"
    print(f"3D Bose r = {r}: {st.variant}, T = {st.T:.5f}{extra}")
