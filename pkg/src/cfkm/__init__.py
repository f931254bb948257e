"""Counterfactual Kaplan-Meier estimation for randomly censored durations."""

from .core import (
    CensoredSample,
    CounterfactualCovariates,
    Grid,
    Observation,
    StepCurve,
    eval_step,
    left_limit,
    validate_sample,
)
from .counterfactual import (
    GridCurve,
    PolicyEffectCurves,
    counterfactual_cdf,
    counterfactual_curve,
    cumulative_hazard,
    oracle_cdf,
    policy_effects,
    rothe_cdf,
)
from .estimators import (
    ConditionalCurveRequest,
    beran_conditional,
    conditional_ecdf,
    kaplan_meier,
)
from .kernels import (
    BandwidthRule,
    KernelSpec,
    default_bandwidth,
    density_estimate,
    kernel_value,
    nw_weights,
)

__version__ = "0.1.0"
