"""Semi-supervised CSI positioning with simulator-in-the-loop data.

The package covers the full pipeline: a stochastic cluster channel
simulator for an indoor hall (channel_sim), delay/angle spread fitting
that closes the loop from labeled measurements back to the simulator
(channel_stats), a compact binary dataset format (dataset), a float64
MLP with exact gradients trained by Adam under a cosine schedule
(neural_net), the biased-teacher / weighted-student training schemes
(sslb), and an experiment bench with a CLI (bench_cli).
"""

from .bench_cli import (
    ExperimentConfig,
    config_from_dict,
    config_hash,
    default_config,
    fast_config,
    position_errors,
    sweep_labeled,
    ablate_weight_scale,
    ablate_confidence,
    uchs_loop,
)
from .channel_sim import (
    ScenarioConfig,
    Scenario,
    SimulatorParams,
    MultipathSet,
    ConfigurationError,
    GenerationError,
    build_scenario,
    default_simulator_params,
    link_geometry,
    los_decay_length,
    draw_los_state,
    pathloss,
    generate_link_channel,
    synthesize_cir,
    generate_sample,
    generate_dataset,
    sample_ue_positions,
)
from .channel_stats import (
    ChannelStatistics,
    PathEstimate,
    StatisticsError,
    detect_multipaths,
    delay_spread,
    angle_spread,
    fit_lognormal,
    extract_statistics,
    update_simulator_params,
)
from .dataset import (
    Dataset,
    FormatError,
    read_dataset,
    write_dataset,
    split,
    subset_labeled,
    featurize,
    featurize_batch,
    feature_dim,
)
from .neural_net import (
    NetworkSpec,
    MlpParams,
    TrainConfig,
    TrainedModel,
    TrainingError,
    init_params,
    forward,
    loss_and_gradients,
    adam_step,
    cosine_lr,
    train,
    save_model,
    load_model,
)
from .reports import EvalReport, accuracy_at_quantile
from .sslb import (
    SCHEMES,
    KdeModel,
    PseudoLabelSet,
    ReferencePair,
    knn_reference,
    nearest_reference_indices,
    build_teacher_targets,
    supervised_loss,
    teacher_loss,
    student_loss,
    sslr_weighted_loss,
    scale_weights,
    silverman_bandwidth,
    fit_kde,
    kde_eval,
    confidence_weights,
    linear_confidence,
    pseudo_label,
    train_teacher,
    train_student,
    train_scheme_model,
    run_scheme,
    scheme_position_errors,
)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "config_from_dict", "config_hash",
    "default_config", "fast_config", "position_errors", "sweep_labeled",
    "ablate_weight_scale", "ablate_confidence", "uchs_loop",
    "ScenarioConfig", "Scenario", "SimulatorParams", "MultipathSet",
    "ConfigurationError", "GenerationError", "build_scenario",
    "default_simulator_params", "generate_link_channel", "synthesize_cir",
    "generate_sample", "generate_dataset", "sample_ue_positions",
    "link_geometry", "los_decay_length", "draw_los_state", "pathloss",
    "ChannelStatistics", "PathEstimate", "StatisticsError",
    "detect_multipaths", "delay_spread", "angle_spread", "fit_lognormal",
    "extract_statistics", "update_simulator_params",
    "Dataset", "FormatError", "read_dataset", "write_dataset", "split",
    "subset_labeled", "featurize", "featurize_batch", "feature_dim",
    "NetworkSpec", "MlpParams", "TrainConfig", "TrainedModel",
    "TrainingError", "init_params", "forward", "loss_and_gradients",
    "adam_step", "cosine_lr", "train", "save_model", "load_model",
    "EvalReport", "accuracy_at_quantile",
    "SCHEMES", "KdeModel", "PseudoLabelSet", "ReferencePair",
    "knn_reference", "nearest_reference_indices", "build_teacher_targets",
    "supervised_loss", "teacher_loss", "student_loss", "sslr_weighted_loss",
    "scale_weights", "silverman_bandwidth", "fit_kde", "kde_eval",
    "confidence_weights", "linear_confidence", "pseudo_label",
    "train_teacher", "train_student", "train_scheme_model", "run_scheme",
    "scheme_position_errors",
    "__version__",
]
