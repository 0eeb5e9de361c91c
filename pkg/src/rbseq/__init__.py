"""Stationary binary sequences from delayed renewal processes."""

__version__ = "0.1.0"

from . import errors
from .direct import (
    CovarianceSequence,
    TailProxySequence,
    asymptotic_autocov,
    markov_order_check,
    solve_renewal,
    tail_proxy,
)
from .dist import (
    DelayDistribution,
    WaitingTimeDistribution,
    from_density,
    from_descriptor,
    geometric,
    markov_family,
    polynomial_tail,
    stationary_delay,
    stretched_exp_tail,
)
from .estimators import (
    EstimationReport,
    MixingBoundSequence,
    alpha_mixing_bound,
    autocov_limit_variance,
    clt_standardize,
    cross_covariance_Cij,
    empirical_mean,
    estimate_autocov,
    estimate_inverse_mean,
    estimate_waiting_time,
    second_moment_identity,
    variance_autocov,
    variance_waiting_time,
)
from .inverse import (
    CovarianceSpec,
    InversionResult,
    PowerLog,
    StretchedPower,
    covariance_from_spec,
    invert_autocovariance,
    invert_spec,
    kaluza_check,
)
from .likelihood import (
    EntropySummary,
    LogLikelihood,
    conditional_next_prob,
    context_length,
    entropy_summary,
    joint_probability,
    log_likelihood,
    max_entropy_distribution,
    typical_set_count,
)
from .sampler import BinarySequence, GeneratorState, generate, generate_replicas, load
