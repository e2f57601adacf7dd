"""Monte Carlo checks of Bergman-kernel information geometry.

Closed-form Bergman kernels on the disc, polydisc and ball; the Bergman
metric and its curvature; Poisson-Bergman sampling; Fisher metric,
expectation identities and divergences estimated by Monte Carlo; proper
holomorphic maps; and the diastasis-minimizing estimator.
"""

__version__ = "0.1.0"

from .domains import Domain, bergman_kernel, bergman_kernel_series, poisson_bergman, series_truncation
from .exceptions import (BergstatError, ConditioningError, ConfigError, CriticalValueError, DomainError,
                         EvaluationError, NonConvergence, NotPositiveDefinite, SamplerError, UnknownIdentity)
from .estimation import (ComplexNormalSpec, DiastasisEstimator, clt_experiment, complex_normal_sample,
                         consistency_experiment, estimate_zhat)
from .geometry import bergman_metric, diastasis, holo_sectional_curvature, log_kernel_jet
from .infogeo import (IDENTITIES, alpha_divergence_mc, curvature_mc, fisher_metric_mc, identity_suite,
                      kl_divergence_mc, lemma_identity_mc)
from .maps import ProperMap, bell_rule_check, pullback_fisher_mc
from .sampling import MCEstimate, PoissonBergman, rejection_sample

__all__ = [
    "__version__", "BergstatError", "ComplexNormalSpec", "ConditioningError", "ConfigError",
    "CriticalValueError", "DiastasisEstimator", "Domain", "DomainError", "EvaluationError", "IDENTITIES",
    "MCEstimate", "NonConvergence", "NotPositiveDefinite", "PoissonBergman", "ProperMap", "SamplerError",
    "UnknownIdentity", "alpha_divergence_mc", "bell_rule_check", "bergman_kernel", "bergman_kernel_series",
    "bergman_metric", "clt_experiment", "complex_normal_sample", "consistency_experiment", "curvature_mc",
    "diastasis", "estimate_zhat", "fisher_metric_mc", "holo_sectional_curvature", "identity_suite",
    "kl_divergence_mc", "lemma_identity_mc", "log_kernel_jet", "poisson_bergman", "pullback_fisher_mc",
    "rejection_sample", "series_truncation",
]
