"""Time-splitting solver and verification toolkit for the 1+1D nonlinear
Dirac equation with Thirring and Gross-Neveu couplings."""

from .field import (FieldError, InitialProfile, Mesh, OdeOptions, SchemeParams,
                    SpinorField, l2_distance, l2_norm, mass_density,
                    restrict_to_coarse, sample_initial_data, zero_field)
from .scheme import (History, SchemeError, interaction_row, nonlinear_flow,
                     nonlinear_step, oracle_flow, run, split_step,
                     transport_step)
from .analysis import (AnalysisError, CheckReport, ConstantsTable,
                       FunctionalRecord, TriangleSpec, check_glimm_bound,
                       check_interaction_bound, check_triangle_estimates,
                       conservation_report, continuity_modulus,
                       covering_triangle, derive_constants,
                       difference_functionals, interaction_sum,
                       pointwise_bound_report, triangle_row_mass)
from .experiments import (ConvergenceTable, StudyError, convergence_study,
                          homogeneous_benchmark, perturbation_study,
                          special_case_suite)
from .io import (ConfigError, DiagnosticsWriter, FormatError, OutputSpec,
                 RunSpec, parse_config, parse_field, read_field, read_history,
                 serialize_config, write_field, write_history)

__version__ = "0.1.0"
