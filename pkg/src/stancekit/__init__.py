"""stancekit: multi-task Gaussian Process stance classification for rumours."""

from stancekit.evaluation import (
    ConfusionMatrix,
    EvaluationReport,
    micro_average_across_folds,
    score,
)
from stancekit.experiments import (
    ExperimentPlan,
    HarnessConfig,
    build_folds,
    run_baseline_logreg,
    run_baseline_majority,
    run_baseline_nb,
    run_experiment,
)
from stancekit.inference import (
    BinaryDataset,
    EpState,
    FitConfig,
    NumericalFailure,
    ep_fit,
    log_evidence_gradient,
    optimize_hyperparameters,
    predict_probabilities,
    predict_probability,
    probit,
)
from stancekit.kernels import (
    IcmKernelParams,
    LinearKernelParams,
    TaskedInput,
    TaskRangeError,
    gram_matrix,
    icm_kernel,
    linear_kernel,
)
from stancekit.multiclass import (
    FeatureExtractor,
    OptimizerSettings,
    StanceModel,
    load_model,
    predict_stance,
    save_model,
    train_stance_model,
)
from stancekit.sparse import SparseFeatureVector, sparse_dot
from stancekit.stances import Stance, parse_stance
from stancekit.textpipe import (
    BrownClusterTable,
    LabeledInstance,
    PreprocessResources,
    encode_bow,
    encode_brown,
    filter_retweets,
    preprocess,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryDataset",
    "BrownClusterTable",
    "ConfusionMatrix",
    "EpState",
    "EvaluationReport",
    "ExperimentPlan",
    "FeatureExtractor",
    "FitConfig",
    "HarnessConfig",
    "IcmKernelParams",
    "LabeledInstance",
    "LinearKernelParams",
    "NumericalFailure",
    "OptimizerSettings",
    "PreprocessResources",
    "SparseFeatureVector",
    "Stance",
    "StanceModel",
    "TaskRangeError",
    "TaskedInput",
    "build_folds",
    "encode_bow",
    "encode_brown",
    "ep_fit",
    "filter_retweets",
    "gram_matrix",
    "icm_kernel",
    "linear_kernel",
    "load_model",
    "log_evidence_gradient",
    "micro_average_across_folds",
    "optimize_hyperparameters",
    "parse_stance",
    "predict_probabilities",
    "predict_probability",
    "predict_stance",
    "preprocess",
    "probit",
    "run_baseline_logreg",
    "run_baseline_majority",
    "run_baseline_nb",
    "run_experiment",
    "save_model",
    "score",
    "sparse_dot",
    "train_stance_model",
]
