"""Synthetic multi-sinusoid sequences for smoke tests and demos.

A dataset fixes per-dimension structure once (frequency band, amplitude,
offset, phase offset); each sequence then draws one random phase per
frequency band. Clips are perfectly predictable in principle, while held-out
sequences still carry phases never seen in training.
"""

import numpy as np

from .dataio import DatasetSplit, PoseSequence


def make_sinusoid_split(seed=0, n_train=64, n_test=6, n_frames=300, n_dims=54,
                        frequencies=(0.25, 0.4, 0.6), frame_interval=0.04,
                        action="sinusoid") -> DatasetSplit:
    """Train/test sequences with independently drawn per-band phases."""
    rng = np.random.default_rng(seed)
    frequencies = np.asarray(frequencies, dtype=np.float64)
    band = rng.integers(len(frequencies), size=n_dims)
    amplitude = rng.uniform(0.4, 0.8, size=n_dims)
    offset = rng.uniform(-0.3, 0.3, size=n_dims)
    dim_phase = rng.uniform(0.0, 2.0 * np.pi, size=n_dims)
    t = np.arange(n_frames)[:, None] * frame_interval

    def make(subject, trial):
        band_phase = rng.uniform(0.0, 2.0 * np.pi, size=len(frequencies))
        phase = band_phase[band] + dim_phase
        frames = offset + amplitude * np.sin(
            2.0 * np.pi * frequencies[band] * t + phase)
        return PoseSequence(frames, frame_interval, action=action,
                            subject=subject, trial=trial)

    train = [make(1, i) for i in range(n_train)]
    test = [make(5, i) for i in range(n_test)]
    return DatasetSplit(train, test, test_subject=5)
