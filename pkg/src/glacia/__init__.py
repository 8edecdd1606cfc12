"""Conceptual glacial-cycle model: energy balance with ice-albedo and
precipitation-temperature feedbacks, its slow-fast reduction, and the
asymptotic theory of the resulting relaxation oscillations."""

from .asymptotics import (
    AIRY_ZETA,
    AmplitudeExpansion,
    PeriodExpansion,
    amplitude_asymptotic,
    amplitude_bound,
    period_asymptotic,
    period_bounds,
    phi,
    quad_I,
)
from .config import GlaciaConfig, load_config
from .dynamics import IntegratorConfig, LimitCycleMeasurement, detect_crossings, integrate, measure_limit_cycle
from .exceptions import (
    AssumptionError,
    ConfigError,
    ConvergenceError,
    DomainError,
    GlaciaError,
    IntegrationError,
    NoIceSheetError,
    NullclineRangeError,
    SingularIntegrandError,
)
from .full_model import FullParams, classify_stability, find_critical_points, full_rhs, mu_critical
from .parametrization import FeedbackParams, KappaProfile, ModelConstants, derive_scales, dimensionalize
from .reduced_model import (
    FoldData,
    NullclinePair,
    ReducedParams,
    branch_inverse,
    check_assumptions,
    critical_point,
    critical_point_approx,
    find_folds,
    reduce_from_full,
    reduced_rhs,
)
from .sigmoids import SigmoidFamily

__version__ = "0.1.0"
