"""Fisher-Snedecor diffusion: simulation, moment estimation and ergodicity diagnostics."""

__version__ = "0.1.0"

from .core import (Parameters, autocorrelation, autocovariance, drift, fisher_snedecor_density,
                   invariant_cdf, invariant_density, invariant_logpdf, invariant_ppf, scale_density,
                   sigma_squared, sigma_squared_prime, stationary_variance, theoretical_moment)
from .diagnostics import (DecayFit, FitFailure, LLNReport, NormalityReport, autocorrelation_fit,
                          clt_check, clt_window, lln_report, quantile_edges, tv_decay_curve,
                          weighted_tv_decay_curve)
from .errors import (DegenerateDenominator, DomainError, DriftConditionFailure, FSDiffusionError,
                     MeanAtMostOne, MomentDivergenceError, NegativeLogArgument,
                     NumericalDegeneracyError, ParameterError, StabilityError, WindowError)
from .estimate import (EstimateReport, FSVariant, asymptotic_covariance, empirical_covariance,
                       empirical_mixed_moment, empirical_moment, estimate_params_fs,
                       estimate_params_general, fs_map, general_map, long_run_variance)
from .lyapunov import (DriftCertificate, ModifiedDriftCertificate, WeightSpec,
                       check_drift_condition, check_modified_drift_condition, generator_apply,
                       lyapunov_phi)
from .observations import Mode, ObservationSet, observe, read_csv_series
from .simulate import (InitialLaw, Path, PathFunctionals, Scheme, ensemble_digest,
                       path_functionals, sample_invariant, simulate_ensemble, simulate_marginals,
                       simulate_path)
