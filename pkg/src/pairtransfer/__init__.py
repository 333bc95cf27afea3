"""Adaptive transfer learning across paired multi-source sensor time series.

Source domains are ranked by their inter-domain pairwise distance (IPD) to the
target domain; the classifier is pre-trained on the sources with per-domain
learning-rate decay driven by those distances and then fine-tuned on the
target with a validation-adaptive learning rate.
"""

__version__ = "0.1.0"

from .distance import DistanceMetric, distance
from .errors import (
    ConfigError,
    DegenerateSimilarityError,
    IngestionError,
    InsufficientDataError,
    NumericError,
    PairingError,
    PairTransferError,
    SplitError,
)
from .timeseries import (
    DomainDataset,
    PairedMultiSourceDataset,
    TimeSeries,
    load_dsa_directory,
    load_generic,
    rescale_minmax,
    split_by_subject,
    write_generic,
)
from .similarity import (
    DifferenceSet,
    DomainWeights,
    IpdEstimate,
    IpdReport,
    KdeModel,
    compute_ipd_report,
    domain_weights,
    empirical_difference,
    fit_kde,
    ipd_estimate,
    rank_influential,
    sample_kde,
)
from .classifier import ClassifierState, MLPArchitecture, Prediction
from .trainer import (
    FinetuneConfig,
    PretrainConfig,
    TrainingTrace,
    finetune,
    pretrain,
    pretrain_random_order,
    train_full_pipeline,
)
from .evaluation import (
    BenchmarkSpec,
    EvaluationReport,
    ExperimentConfig,
    inject_noise,
    make_binary_task,
    rcc,
    run_experiment,
    synthesize_benchmark,
)
