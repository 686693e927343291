"""UAV navigation simulator with an ISAC base station."""

from ._core import (
    AggregateMetrics,
    EpisodeResult,
    EvalRow,
    Lemma2Result,
    PlannerParams,
    RadioConfig,
    SimConfig,
    SlotRecord,
    TaskConfig,
    TrainConfig,
    chi_squared_quantile_2dof,
    default_config,
    evaluate,
    load_config,
    mahalanobis,
    parse_config,
    run_episode,
    sensing_snr,
    serialize_config,
    steering_vector,
    synthesize_beamformer,
    train,
    validate_lemma2,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateMetrics",
    "EpisodeResult",
    "EvalRow",
    "Lemma2Result",
    "PlannerParams",
    "RadioConfig",
    "SimConfig",
    "SlotRecord",
    "TaskConfig",
    "TrainConfig",
    "chi_squared_quantile_2dof",
    "default_config",
    "evaluate",
    "load_config",
    "mahalanobis",
    "parse_config",
    "run_episode",
    "sensing_snr",
    "serialize_config",
    "steering_vector",
    "synthesize_beamformer",
    "train",
    "validate_lemma2",
]
