"""Angle-file loading, normalization, and batch/clip sampling.

Sequence files hold one frame per line as comma-separated decimal floats with
a constant column count (99 in the standard distribution), laid out on disk
as ``<root>/S<subject>/<action>_<trial>.txt``. All sampling here is a pure
function of the caller-provided random generator, so batches and test clips
are reproducible from a seed.
"""

import dataclasses
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, InvalidInputError

_SUBJECT_DIR = re.compile(r"^S(\d+)$")


@dataclass
class PoseSequence:
    """A recorded motion: frames-by-dimension angles plus clip metadata."""

    frames: np.ndarray          # (n_frames, dim) float64
    frame_interval: float       # seconds between consecutive frames
    action: str = ""
    subject: int = -1
    trial: int = -1

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise InvalidInputError("frames must be a non-empty 2-D array")
        if not np.all(np.isfinite(self.frames)):
            raise InvalidInputError("frames contain non-finite values")
        if not self.frame_interval > 0.0:
            raise InvalidInputError("frame_interval must be positive")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class NormalizationStats:
    """Per-dimension mean/std plus the mask of dimensions the model sees.

    Dimensions outside ``used_dims`` (near-constant columns and any explicitly
    excluded block) are dropped by :func:`normalize` and reinstated by
    :func:`denormalize` as their training-set means.
    """

    mean: np.ndarray
    std: np.ndarray
    used_dims: np.ndarray       # bool mask, True for dimensions the model sees

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        self.used_dims = np.asarray(self.used_dims, dtype=bool)
        if not (self.mean.shape == self.std.shape == self.used_dims.shape):
            raise InvalidInputError("mean, std and used_dims must have equal shapes")
        if np.any(self.std[self.used_dims] <= 0.0):
            raise InvalidInputError("used dimensions must have positive std")

    @property
    def n_dims(self) -> int:
        return self.mean.shape[0]

    @property
    def n_used(self) -> int:
        return int(np.count_nonzero(self.used_dims))

    @property
    def constant_values(self) -> np.ndarray:
        """Values written back into the dropped dimensions."""
        return self.mean[~self.used_dims]


@dataclass
class PredictionTask:
    """One (conditioning window, target window) pair drawn from a dataset.

    ``seed`` and ``target`` are normalized; ``seed`` carries the appended
    one-hot columns once :func:`append_action_onehot` has run. ``raw_target``
    keeps the unnormalized full-width frames for angle-space evaluation.
    """

    seed: np.ndarray            # (t_in, n_used [+ num_actions]) normalized
    target: np.ndarray          # (t_out, n_used) normalized
    action_onehot: np.ndarray | None = None
    raw_target: np.ndarray | None = None
    action: str = ""
    subject: int = -1
    trial: int = -1
    start: int = -1

    def __post_init__(self):
        if self.action_onehot is not None:
            self.action_onehot = np.asarray(self.action_onehot, dtype=np.float64)
            if float(self.action_onehot.sum()) != 1.0:
                raise InvalidInputError("action one-hot must sum to exactly 1")


@dataclass
class DatasetSplit:
    """Train/test partition of loaded sequences, disjoint by subject."""

    train: list
    test: list
    test_subject: int = 5

    def __post_init__(self):
        bad = [s for s in self.test if s.subject != self.test_subject]
        if bad:
            raise InvalidInputError(
                f"test split contains sequences of subject {bad[0].subject}, "
                f"expected only subject {self.test_subject}")
        if any(s.subject == self.test_subject for s in self.train):
            raise InvalidInputError("train split contains the test subject")


def load_sequence(source, action="", subject=-1, trial=-1,
                  frame_interval=0.04) -> PoseSequence:
    """Parse one comma-separated angle file into a PoseSequence.

    ``source`` may be a path or an open text/binary stream. The column count
    of the first line fixes the width; every following line must match.

    Raises:
        FormatError: empty input, an inconsistent line width (the message
            names the 1-based line number), or a non-numeric token.
    """
    if hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        name = getattr(source, "name", "<stream>")
    else:
        name = str(source)
        text = Path(source).read_text()
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split(",")
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            raise FormatError(f"{name}: line {lineno}: non-numeric value") from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise FormatError(
                f"{name}: line {lineno}: expected {width} values, got {len(values)}")
        rows.append(values)
    if not rows:
        raise FormatError(f"{name}: empty sequence file")
    frames = np.array(rows, dtype=np.float64)
    return PoseSequence(frames, frame_interval, action=action,
                        subject=subject, trial=trial)


def write_sequence(frames, dest):
    """Write frames in the comma-separated text format.

    Values are printed with shortest round-trip precision, so writing and
    re-loading reproduces the array bit-exactly.
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise InvalidInputError("frames must be 2-D")
    lines = [",".join(repr(float(v)) for v in row) for row in frames]
    body = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(body)
    else:
        Path(dest).write_text(body)


def downsample(seq: PoseSequence, factor: int) -> PoseSequence:
    """Keep every ``factor``-th frame starting at index 0."""
    if int(factor) != factor or factor < 1:
        raise InvalidInputError("downsample factor must be a positive integer")
    factor = int(factor)
    return PoseSequence(seq.frames[::factor].copy(),
                        seq.frame_interval * factor,
                        action=seq.action, subject=seq.subject, trial=seq.trial)


def compute_normalization(train, eps=1e-4, exclude_dims=()) -> NormalizationStats:
    """Per-dimension statistics over all training frames.

    A dimension is kept when its population std is at least ``eps``;
    indices in ``exclude_dims`` (the global translation/rotation block on
    99-column data) are forced out regardless of variance.
    """
    train = list(train)
    if not train:
        raise InvalidInputError("cannot compute statistics from an empty train set")
    frames = np.concatenate([s.frames for s in train], axis=0)
    mean = frames.mean(axis=0)
    std = frames.std(axis=0)
    used = std >= eps
    if len(exclude_dims):
        used[np.asarray(list(exclude_dims), dtype=int)] = False
    return NormalizationStats(mean, std, used)


def normalize(frames, stats: NormalizationStats) -> np.ndarray:
    """Standardize frames and drop unused dimensions."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != stats.n_dims:
        raise InvalidInputError(
            f"expected frames of width {stats.n_dims}, got {frames.shape}")
    used = stats.used_dims
    return (frames[:, used] - stats.mean[used]) / stats.std[used]


def denormalize(frames, stats: NormalizationStats) -> np.ndarray:
    """Invert :func:`normalize`, reinstating dropped dims as their constants."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != stats.n_used:
        raise InvalidInputError(
            f"expected frames of width {stats.n_used}, got {frames.shape}")
    out = np.tile(stats.mean, (frames.shape[0], 1))
    used = stats.used_dims
    out[:, used] = frames * stats.std[used] + stats.mean[used]
    return out


def load_split(root, actions=None, test_subject=5, downsample_factor=2,
               raw_frame_interval=0.02) -> DatasetSplit:
    """Load every matching sequence under ``<root>/S<subject>/`` and split.

    Sequences of ``test_subject`` form the test set; all other subjects are
    training data. Files are downsampled on load (factor 2 turns the 50 fps
    recordings into the 25 fps the rest of the pipeline assumes).
    """
    root = Path(root)
    if not root.is_dir():
        raise InvalidInputError(f"data root {root} is not a directory")
    wanted = set(actions) if actions is not None else None
    train, test = [], []
    for subject_dir in sorted(root.iterdir()):
        match = _SUBJECT_DIR.match(subject_dir.name)
        if not match or not subject_dir.is_dir():
            continue
        subject = int(match.group(1))
        for path in sorted(subject_dir.glob("*.txt")):
            stem = path.stem
            if "_" not in stem:
                continue
            action, trial_text = stem.rsplit("_", 1)
            try:
                trial = int(trial_text)
            except ValueError:
                continue
            if wanted is not None and action not in wanted:
                continue
            seq = load_sequence(path, action=action, subject=subject,
                                trial=trial, frame_interval=raw_frame_interval)
            seq = downsample(seq, downsample_factor)
            (test if subject == test_subject else train).append(seq)
    if not train and not test:
        raise InvalidInputError(f"no sequence files found under {root}")
    return DatasetSplit(train, test, test_subject=test_subject)


def slice_task(seq: PoseSequence, start: int, t_in: int, t_out: int,
               stats: NormalizationStats) -> PredictionTask:
    """Cut one task out of a sequence at a given start frame."""
    need = t_in + t_out
    if start < 0 or start + need > seq.n_frames:
        raise InvalidInputError(
            f"window [{start}, {start + need}) exceeds sequence of "
            f"{seq.n_frames} frames")
    seed = normalize(seq.frames[start:start + t_in], stats)
    raw_target = seq.frames[start + t_in:start + need].copy()
    target = normalize(raw_target, stats)
    return PredictionTask(seed=seed, target=target, raw_target=raw_target,
                          action=seq.action, subject=seq.subject,
                          trial=seq.trial, start=start)


def append_action_onehot(task: PredictionTask, action_index: int,
                         num_actions: int = 15) -> PredictionTask:
    """Widen every seed frame with a one-hot action indicator.

    The decoder re-appends the same vector to each frame it feeds back, so
    targets keep their original width.
    """
    if not 0 <= action_index < num_actions:
        raise InvalidInputError(
            f"action index {action_index} outside [0, {num_actions})")
    if task.action_onehot is not None:
        raise InvalidInputError("task already carries an action one-hot")
    onehot = np.zeros(num_actions, dtype=np.float64)
    onehot[action_index] = 1.0
    seed = np.hstack([task.seed, np.tile(onehot, (task.seed.shape[0], 1))])
    return dataclasses.replace(task, seed=seed, action_onehot=onehot)


def _eligible(sequences, need, action=None):
    out = [s for s in sequences if s.n_frames >= need
           and (action is None or s.action == action)]
    return out


def make_training_batch(rng, split: DatasetSplit, stats: NormalizationStats,
                        config) -> list:
    """Draw one seeded batch of training tasks.

    A sequence is picked uniformly among those long enough, then a start
    offset uniformly among its valid positions; the sampled windows are
    normalized and, in supervised mode, tagged with the action one-hot.
    """
    need = config.t_in + config.t_out
    pool = _eligible(split.train, need)
    if not pool:
        raise ConfigError(
            f"no training sequence has the {need} frames required "
            f"(t_in={config.t_in}, t_out={config.t_out})")
    tasks = []
    for _ in range(config.batch_size):
        seq = pool[int(rng.integers(len(pool)))]
        start = int(rng.integers(seq.n_frames - need + 1))
        task = slice_task(seq, start, config.t_in, config.t_out, stats)
        if config.supervised:
            task = append_action_onehot(task, config.action_index(seq.action),
                                        config.num_actions)
        tasks.append(task)
    return tasks


def select_test_clips(rng, split: DatasetSplit, stats: NormalizationStats,
                      config, actions=None, clips_per_action=8) -> dict:
    """Seeded, reproducible test clips: ``clips_per_action`` tasks per action."""
    if actions is None:
        actions = config.actions
    need = config.t_in + config.t_out
    clips = {}
    for action in actions:
        pool = _eligible(split.test, need, action=action)
        if not pool:
            raise ConfigError(
                f"no test sequence of action {action!r} has {need} frames")
        tasks = []
        for _ in range(clips_per_action):
            seq = pool[int(rng.integers(len(pool)))]
            start = int(rng.integers(seq.n_frames - need + 1))
            task = slice_task(seq, start, config.t_in, config.t_out, stats)
            if config.supervised:
                task = append_action_onehot(task, config.action_index(action),
                                            config.num_actions)
            tasks.append(task)
        clips[action] = tasks
    return clips


def stack_tasks(tasks):
    """Stack a list of tasks into batch arrays for the model.

    Returns:
        (enc_in, targets, onehot): (B, t_in, d_in) seed frames, (B, t_out, n)
        normalized targets, and (B, num_actions) one-hots or None.
    """
    enc_in = np.stack([t.seed for t in tasks])
    targets = np.stack([t.target for t in tasks])
    if tasks[0].action_onehot is not None:
        onehot = np.stack([t.action_onehot for t in tasks])
    else:
        onehot = None
    return enc_in, targets, onehot
