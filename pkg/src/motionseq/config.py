"""Run configuration shared by the data pipeline, the model and the CLI."""

import hashlib
import json
from dataclasses import dataclass, field, asdict

from .errors import ConfigError

# The 15 activity labels of the standard angle-file distribution, in one-hot
# index order.
H36M_ACTIONS = (
    "directions", "discussion", "eating", "greeting", "phoning",
    "posing", "purchases", "sitting", "sittingdown", "smoking",
    "takingphoto", "waiting", "walking", "walkingdog", "walkingtogether",
)

# Raw angle files are 50 fps; the pipeline keeps every 2nd frame.
RAW_FRAME_INTERVAL = 0.02
DEFAULT_DOWNSAMPLE = 2
# Number of leading per-frame values holding global translation and rotation
# in the 99-column layout. They never enter the model or the error metric.
DEFAULT_GLOBAL_DIMS = 6


@dataclass
class ModelConfig:
    """Everything that determines a training or evaluation run.

    ``n_joint_dims`` is the number of varying joint-angle dimensions kept by
    normalization (54 on the standard dataset); the model input width is
    ``n_joint_dims`` plus one extra dimension per action when ``supervised``.
    """

    n_joint_dims: int = 54
    hidden: int = 1024
    supervised: bool = False
    actions: tuple = field(default_factory=lambda: H36M_ACTIONS)
    residual: bool = True
    tied: bool = True
    sample_feedback: bool = True       # decoder consumes its own outputs while training
    detach_feedback: bool = False      # ablation: no gradient through fed-back samples
    t_in: int = 50
    t_out: int = 10
    lr: float = 0.05
    batch_size: int = 16
    max_grad_norm: float = 5.0
    iterations: int = 10000
    seed: int = 0

    def __post_init__(self):
        self.actions = tuple(self.actions)

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    @property
    def d_in(self) -> int:
        return self.n_joint_dims + (self.num_actions if self.supervised else 0)

    def action_index(self, name: str) -> int:
        try:
            return self.actions.index(name)
        except ValueError:
            raise ConfigError(f"action {name!r} is not part of this configuration") from None

    def validate(self):
        if self.n_joint_dims < 1:
            raise ConfigError("n_joint_dims must be positive")
        if self.hidden < 1:
            raise ConfigError("hidden size must be positive")
        if self.t_in < 1 or self.t_out < 1:
            raise ConfigError("t_in and t_out must be at least 1")
        if not self.lr > 0.0:
            raise ConfigError("learning rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch size must be positive")
        if not self.max_grad_norm > 0.0:
            raise ConfigError("max_grad_norm must be positive")
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if self.supervised and self.num_actions == 0:
            raise ConfigError("supervised mode requires a non-empty action list")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["actions"] = list(self.actions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["actions"] = tuple(d.get("actions", ()))
        return cls(**d)


def config_hash(cfg: ModelConfig) -> str:
    """Short stable digest of a resolved configuration, used to name run dirs."""
    payload = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:10]
