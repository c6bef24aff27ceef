"""Shell-truncated few-body dynamics for localized 1D Fermi-Hubbard
chains: exact small-lattice evolution, per-atom occupancy-matrix
truncation, CDW ensemble averaging, observable analysis and canonical
state reconstruction."""

from .errors import (ConfigurationError, FermishellError,
                     NumericalDegradationError, ResourceLimitError)
from .model import (AUBRY_ANDRE, GOLDEN_BETA, SPIN_DN, SPIN_UP, STARK,
                    ModelSpec, ShellSpec, build_potential, kappa_for_k,
                    kappa_to_k, other_spin, shell_sites)
from .fewbody import (FewBodyProblem, FewBodyState, SectorBasis,
                      bipartite_ee, densities, density_correlator,
                      density_correlation_matrix, enumerate_basis,
                      imbalance, interaction_table, occupancy_matrix,
                      sector_unitary_from_single,
                      single_particle_hamiltonian, trotter_step)
from .exact import (FullConfiguration, energy_expectation, exact_evolve,
                    exact_imbalance_trace)
from .approx import (PerAtomGamma, TruncatedProblem, apply_approximations,
                     approx_imbalance_trace, assemble_gamma,
                     gamma_sigma_r, gamma_sigma_r_trace, window_sites)
from .cdw import (CdwEnsembleSpec, TimeTrace, cdw_imbalance_trace,
                  config_multiplicity, correlation_profile, ee_trace,
                  few_body_imbalance, study_positions)
from .reconstruct import (ParentState, SpinSectorDensity, canonical_parent,
                          parent_entropy, single_spin_density)
from .analysis import (Spectrum, bessel_occupancy, confinement_from_revival,
                       dominant_peak, extrapolate_convergence,
                       fourier_spectrum, perturbative_side_peak,
                       plateau_correlation, rms_deviation,
                       steady_state_average)

__version__ = "0.1.0"
