"""Fast spectral solver for the space-homogeneous Boltzmann-Nordheim equation.

Classical, Fermi-Dirac and Bose-Einstein particles on a uniform velocity
grid, with the velocity rescaling method, equilibrium machinery and
diagnostics.
"""

from .collision import (BlowUpError, CollisionWorkspace, assemble_Q, collision_pieces, direct_pieces,
                        direct_Q_oracle)
from .diagnostics import entropy_classical, entropy_quantum, lp_norm, moments, relaxation_error, stress_tensor
from .equilibrium import EquilibriumState, classify, discretize, eval_state
from .experiments import (ConfigError, SimConfig, parse_config, preset_relaxation, preset_residual,
                          residual_run, run_config, setup)
from .grid import GridSpec, SpectralField, build_grid, forward, fourier_derivative, inverse
from .integrate import SimState, euler_step, init_state, rk2_ssp_step, run
from .kernels import (KernelTable, beta_reference, build_hardsphere3d, build_maxwell2d, build_maxwell2d_symmetric,
                      build_vhs_quadrature)
from .quantum import (ParticleStatistics, bose_integral, brent, fermi_integral, hbar_star, i_eq_upper,
                      solve_from_mass_energy, solve_from_mass_temperature)
from .rescaling import FrameState, classical_frame, rescaled_frame, from_rescaled, to_rescaled

__version__ = "0.1.0"
