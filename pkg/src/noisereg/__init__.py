"""Variance-regularized training under label noise, with generalization diagnostics.

The toolkit trains small fully-connected classifiers on synthetically
corrupted labels, regularizing the variance of paired stochastic forward
passes, and measures what that buys: Jacobian norms, local intrinsic
dimensionality, critical sample ratio, and label precision.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import DatasetSpec, ExperimentConfig, config_from_dict, load_config, parse_config
from .datasets import (
    LabeledDataset,
    load_dataset,
    load_idx,
    make_blobs,
    make_two_moons,
    save_dataset,
    train_test_split,
)
from .diagnostics import (
    CsrConfig,
    LidConfig,
    LidEstimate,
    critical_sample_ratio,
    hidden_features,
    label_precision,
    lid_batch,
    lid_mle,
)
from .errors import (
    ConfigError,
    DegenerateGeometryError,
    DimensionError,
    DivergenceError,
    FormatError,
    GenerationError,
    InfiniteLidError,
    LabelError,
    NoiseRegError,
    NumericOverflowError,
    ParameterError,
    StateError,
    UndefinedMetricError,
)
from .harness import RunResult, prepare_data, run_experiment
from .jacobian import (
    EstimatorVarianceReport,
    JacobianReport,
    batch_frob_sq,
    batch_jacobians,
    estimator_variance_report,
    exact_jacobian,
    mc_jacobian_norm,
    quadform_variance,
    sample_bound,
)
from .metrics import METRICS_HEADER, MetricsRow, MetricsWriter, read_metrics_csv, write_metrics_csv
from .nn import (
    ForwardDraws,
    Gradients,
    MlpModel,
    PerturbationSpec,
    mlp_backward,
    mlp_forward,
    per_example_cross_entropy,
    replay_forward,
    sample_draws,
    softmax,
    softmax_cross_entropy,
)
from .noise import (
    NoiseModel,
    TransitionMatrix,
    cifar10_asymmetric_matrix,
    circular_noise_matrix,
    corrupt,
    uniform_noise_matrix,
)
from .optim import OptimState, cosine_lr, sgd_momentum_step
from .regularizer import (
    DegeneratePerturbationWarning,
    Objective,
    RegularizerConfig,
    RvResult,
    combined_objective,
    lambda_at,
    r_v_hat,
)
from .report import render_report
from .rng import RngStream

__version__ = "0.1.0"
