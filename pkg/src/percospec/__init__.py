"""Numerical lab for Anderson-percolation Hamiltonians on Z^d.

Random site-diluted lattices with a random potential: configurations, sparse
operators, exact finite-volume spectra, lattice-animal eigenvalue catalogues
and Monte Carlo checks of the integrated density of states.
"""
__version__ = "0.1.0"

from .errors import (InsufficientStatisticsError, PercospecError, PreconditionError, ResourceError,
                     ValidationError)
from .measure import INF, MeasureSpec, RandomStream, sample, sample_many, support_real, wegner_constant
from .lattice import (Box, ClusterLabeling, PercolationConfig, config_from_active, generate_config,
                      label_clusters, vertex_deficiency)
from .hamiltonian import SparseHamiltonian, assemble
from .spectral import (char_poly_exact, count_interval, count_leq, count_leq_many, counting_function,
                       eigen_sym, localization_profile)
from .animals import (AnimalCatalogue, LatticeAnimal, build_catalogue, enumerate_animals, predicted_jump,
                      verify_algebraic_integer)
from .experiments import (DEFAULT_SEED, EmpiricalIDS, JumpReport, collect_eigenvalues, continuity_check,
                          detect_jumps, estimate_ids, lifshitz_probe, multiplicity_lower_bound_check,
                          support_check, wegner_experiment)
