"""Multiband subspace-fitting delay estimation and unresolved-multipath bias analysis."""

from .bias import (
    BiasReport,
    PerturbationModel,
    expansion_chain_check,
    bias_gradient_eigweight,
    bias_gradient_general,
    bias_gradient_identity,
    build_perturbation,
    hessian_general,
    hessian_identity,
    model_covariance,
    perturbed_subspace_first_order,
    predict_bias,
    unperturbed_decomposition,
)
from .errors import (
    AliasingError,
    ConfigError,
    MultibandError,
    RankDeficientError,
    SubspaceError,
    TrialError,
)
from .hankel import (
    BlockHankelConfig,
    SubspaceDecomposition,
    block_hankel,
    eigendecompose,
    expected_covariance,
    sample_covariance,
)
from .metrics import MetricSeries, crlb_phase_variance, empirical_rmse, predicted_rmse
from .model import (
    BandPlan,
    ClusterApprox,
    ClusteredChannel,
    SnapshotSet,
    cluster_approx,
    exact_frequency_response,
    first_order_response,
    noise_power_for_snr,
    steering_derivative,
    steering_vector,
    synthesize_snapshots,
)
from .wsf import (
    FitResult,
    WeightingMode,
    estimate_delays,
    estimate_from_covariance,
    fit_subspace,
    projector_complement,
    reduced_steering_matrix,
    wsf_cost,
    wsf_gradient,
    wsf_hessian_limit,
)

__version__ = "0.1.0"
