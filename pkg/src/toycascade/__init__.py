"""Numerical laboratory for a finite frequency-cascade lattice model.

Simulate the Hamiltonian lattice flow, certify its fixed-mass energy
minimizers and their exact Hessian spectrum, and sample the fixed-mass Gibbs
measures to study low-temperature concentration around the three-mode
minimizers with Gaussian fluctuations.
"""

from .errors import (Antipodal, BudgetExceeded, ConfigError, DegenerateSite,
                     DoesNotFit, IterationFailure, NonConvergence,
                     NonUniqueNearest, NotPositive, NotSymmetric, SolveFailed,
                     SupportTooSmall, ToyCascadeError, ValidityGuard)
from .lattice import (HessianMatrix, HydroState, LatticeState, MinimizerId,
                      from_madelung, grad_h, hamiltonian, hessian_h, mass,
                      minimizer_energy, minimizer_state, phase_rotate,
                      state_from_json_dict, state_to_json_dict, to_madelung,
                      translate, zero_state)
from .dynamics import (IntegratorConfig, Trajectory, hydro_rhs, integrate,
                       measure_rotation_rate, rhs)
from .stationary import (PhaseLockedProfile, profile_to_state, scan_positivity,
                         solve_phase_locked)
from .minimize import (MinimizeResult, RhoProfile, brute_force_min,
                       check_5over3, five_mode_reduction, h_inphase,
                       k_mode_energy, maximize_h_on_sphere,
                       minimize_h_on_sphere, rearrange_nonincreasing)
from .spectral import (SpectralReport, coercivity_check, eigen_decompose,
                       hessprops_catalogue, jacobi_eigh, shifted_operator)
from .gibbs import (ChainResult, ConcentrationReport, GaussianReference,
                    NearestMinimizer, ReplicaExchangeResult, SamplerConfig,
                    cap_point, cap_quadratic_form, concentration_report,
                    g_intrinsic, g_k_value, g_value, gaussian_reference_sample,
                    log_map, mcmc_run, nearest_minimizer, phase_average_test,
                    proj_perp, replica_exchange_run, sphere_uniform,
                    tangent_covariance)

__version__ = "0.1.0"
