"""Pseudo-spectral simulator for a damped, stochastically forced 3-layer
quasi-geostrophic system on a rectangle with Dirichlet conditions."""

__version__ = "0.1.0"

from .coupling import (LayerCoupling, OperatorEigenpairs, apply_operator,
                       eigenpairs, lambda_from_physical, solve_elliptic,
                       symmetrize, velocity)
from .dynamics import (SimConfig, TrajectoryRecord, nonlinear_term,
                       parse_observables, run_trajectory, step_eta)
from .errors import (BlowUpError, ConfigurationError, FieldFormatError,
                     FieldLengthError, SamplingError, ShapeError,
                     TimeStepError, UnsupportedExponentError)
from .experiments import (SweepReport, galerkin_sweep, log_estimate_monitor,
                          lp_envelope, viscosity_sweep, w14_monitor,
                          weak_residual, yudovich_stability)
from .fieldio import read_field, write_field
from .measures import (AveragedMeasure, TightnessReport, invariance_test,
                       kb_average, tightness_diagnostic)
from .noise import (BrownianIncrements, NoiseSpec, OUState, make_noise,
                    ou_step, regularity_check, sample_increment, sample_path,
                    sigma_for_stationary_l2)
from .runconfig import RunSettings, parse_config, realize
from .spectral import (LayerField, SpectralBasis, build_basis,
                       dual_h1_distance, fractional_norm, lp_norm,
                       lp_norm_layerwise, single_mode_field)
