"""Residual sequence-to-sequence GRU forecasting of joint-angle motion."""

from .config import H36M_ACTIONS, ModelConfig
from .dataio import (
    DatasetSplit,
    NormalizationStats,
    PoseSequence,
    PredictionTask,
    append_action_onehot,
    compute_normalization,
    denormalize,
    downsample,
    load_sequence,
    load_split,
    make_training_batch,
    normalize,
    select_test_clips,
    write_sequence,
)
from .baselines import running_average, zero_velocity
from .evalharness import EvalReport, evaluate, mean_angle_error
from .grunet import GruParams, gru_cell, init_params, output_decoder
from .seq2seq import TrainedModel, load_model, predict, save_model, train

__all__ = [
    "H36M_ACTIONS",
    "ModelConfig",
    "DatasetSplit",
    "NormalizationStats",
    "PoseSequence",
    "PredictionTask",
    "append_action_onehot",
    "compute_normalization",
    "denormalize",
    "downsample",
    "load_sequence",
    "load_split",
    "make_training_batch",
    "normalize",
    "select_test_clips",
    "write_sequence",
    "running_average",
    "zero_velocity",
    "EvalReport",
    "evaluate",
    "mean_angle_error",
    "GruParams",
    "gru_cell",
    "init_params",
    "output_decoder",
    "TrainedModel",
    "load_model",
    "predict",
    "save_model",
    "train",
]

__version__ = "0.1.0"
