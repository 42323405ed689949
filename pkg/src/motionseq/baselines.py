"""Constant-pose predictors used as non-learned references."""

import numpy as np

from . import dataio
from .errors import InvalidInputError


def zero_velocity(seed, t_out: int) -> np.ndarray:
    """Repeat the last observed frame for every future step."""
    seed = np.asarray(seed, dtype=np.float64)
    if seed.ndim != 2 or seed.shape[0] < 1:
        raise InvalidInputError("seed must contain at least one frame")
    if t_out < 0:
        raise InvalidInputError("t_out must be non-negative")
    return np.repeat(seed[-1:, :], t_out, axis=0)


def running_average(seed, k: int, t_out: int, autoregressive=False) -> np.ndarray:
    """Predict the mean of the last ``k`` observed frames.

    The default holds that mean fixed for all steps; with ``autoregressive``
    the prediction is appended to the window and the mean recomputed each
    step, which decays toward the window mean instead of staying constant.
    """
    seed = np.asarray(seed, dtype=np.float64)
    if seed.ndim != 2 or seed.shape[0] < 1:
        raise InvalidInputError("seed must contain at least one frame")
    if k < 1 or k > seed.shape[0]:
        raise InvalidInputError(
            f"window k={k} must be within [1, {seed.shape[0]}]")
    if t_out < 0:
        raise InvalidInputError("t_out must be non-negative")
    if not autoregressive:
        mean = seed[-k:, :].mean(axis=0)
        return np.tile(mean, (t_out, 1))
    window = [row.copy() for row in seed[-k:, :]]
    preds = []
    for _ in range(t_out):
        mean = np.mean(window, axis=0)
        preds.append(mean)
        window.pop(0)
        window.append(mean)
    return np.array(preds).reshape(t_out, seed.shape[1])


BASELINE_NAMES = ("zero-velocity", "running-avg-2", "running-avg-4")


def as_predictor(name: str, stats: dataio.NormalizationStats, t_out: int,
                 autoregressive=False):
    """Wrap a named baseline as a task predictor returning raw-width frames.

    The baseline runs in normalized joint space on the task's conditioning
    window and the result is denormalized, mirroring the model's path.
    """
    if name == "zero-velocity":
        fn = lambda seed: zero_velocity(seed, t_out)
    elif name == "running-avg-2":
        fn = lambda seed: running_average(seed, 2, t_out, autoregressive)
    elif name == "running-avg-4":
        fn = lambda seed: running_average(seed, 4, t_out, autoregressive)
    else:
        raise InvalidInputError(
            f"unknown baseline {name!r}; expected one of {BASELINE_NAMES}")

    def predict(task):
        seed = np.asarray(task.seed, dtype=np.float64)[:, :stats.n_used]
        return dataio.denormalize(fn(seed), stats)

    return predict
