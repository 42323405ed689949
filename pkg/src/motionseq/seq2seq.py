"""Encoder-decoder recurrent model over joint-angle frames.

The encoder folds the conditioning window into a hidden state; the decoder
then emits one frame per step, consuming its own previous output (or the
ground-truth frame when teacher forcing) and optionally adding its output as
a delta to that input (residual mode). Training minimizes mean squared error
in normalized joint space, with gradients hand-derived through the whole
unrolled graph, including the fed-back sample path and the residual
connections.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import dataio, grunet, numkernel
from .config import ModelConfig
from .errors import ConfigError, InvalidInputError, NumericError
from .grunet import GruParams


@dataclass
class TrainedModel:
    """Parameters, configuration and data statistics of one training run."""

    encoder: GruParams
    decoder: GruParams        # same object as encoder when cfg.tied
    config: ModelConfig
    stats: dataio.NormalizationStats
    loss_curve: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.config.tied and self.decoder is not self.encoder:
            raise ConfigError("tied model must share one parameter set")


def encode(seed, params: GruParams):
    """Run the cell over the conditioning frames from a zero initial state.

    Args:
        seed: (batch, t_in, d_in) input frames.

    Returns:
        (h, caches): final hidden state (batch, hidden) and per-step caches.
    """
    seed = np.asarray(seed, dtype=np.float64)
    if seed.ndim != 3:
        raise InvalidInputError("encoder input must be (batch, t_in, d_in)")
    h = np.zeros((seed.shape[0], params.hidden))
    caches = []
    for t in range(seed.shape[1]):
        h, cache = grunet.gru_cell_forward(seed[:, t, :], h, params)
        caches.append(cache)
    return h, caches


def decode(h, last_frame, onehot, t_out, params: GruParams, *,
           residual=True, sample_feedback=True, teacher_frames=None):
    """Unroll the decoder for ``t_out`` steps.

    The first input frame is the last conditioning frame; afterwards each
    step consumes the previous prediction (``sample_feedback``) or the
    ground-truth frame from ``teacher_frames``. With ``residual`` the cell
    output is added to the input frame, otherwise it is the frame itself.

    Args:
        h: (batch, hidden) encoder state.
        last_frame: (batch, n_out) joint part of the final conditioning frame.
        onehot: (batch, num_actions) action conditioning or None.
        teacher_frames: (batch, t_out, n_out) ground truth, required when
            ``sample_feedback`` is off.

    Returns:
        (preds, hs, caches): (batch, t_out, n_out) predictions, the per-step
        hidden states, and the per-step cell caches.
    """
    last_frame = np.asarray(last_frame, dtype=np.float64)
    if t_out < 1:
        raise InvalidInputError("t_out must be at least 1")
    if last_frame.ndim != 2 or last_frame.shape[1] != params.n_out:
        raise InvalidInputError(
            f"last_frame has shape {last_frame.shape}, expected "
            f"(batch, {params.n_out})")
    if not sample_feedback and teacher_frames is None:
        raise InvalidInputError("teacher forcing requires ground-truth frames")
    prev = last_frame
    preds, hs, caches = [], [], []
    for t in range(t_out):
        u = prev if onehot is None else np.hstack([prev, onehot])
        h, cache = grunet.gru_cell_forward(u, h, params)
        delta = grunet.output_decoder(h, params)
        pred = prev + delta if residual else delta
        if not np.all(np.isfinite(pred)):
            raise NumericError(f"non-finite prediction at decoder step {t}")
        preds.append(pred)
        hs.append(h)
        caches.append(cache)
        prev = pred if sample_feedback else teacher_frames[:, t, :]
    return np.stack(preds, axis=1), hs, caches


def mse_loss(pred, target) -> float:
    """Mean squared error over batch, time and dimension."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InvalidInputError(
            f"prediction shape {pred.shape} does not match target {target.shape}")
    return float(np.mean(np.square(pred - target)))


@dataclass
class ForwardGraph:
    """Forward intermediates of one batch, consumed by :func:`backward`."""

    enc_params: GruParams
    dec_params: GruParams
    enc_caches: list
    dec_caches: list
    dec_hs: list
    preds: np.ndarray
    targets: np.ndarray
    residual: bool
    sample_feedback: bool
    detach_feedback: bool


def forward(enc_params, dec_params, enc_in, targets, onehot, *,
            residual=True, sample_feedback=True, detach_feedback=False):
    """Full encode/decode pass with loss. Returns (loss, graph)."""
    targets = np.asarray(targets, dtype=np.float64)
    n_out = dec_params.n_out
    h, enc_caches = encode(enc_in, enc_params)
    last_frame = np.asarray(enc_in, dtype=np.float64)[:, -1, :n_out]
    preds, dec_hs, dec_caches = decode(
        h, last_frame, onehot, targets.shape[1], dec_params,
        residual=residual, sample_feedback=sample_feedback,
        teacher_frames=None if sample_feedback else targets)
    loss = mse_loss(preds, targets)
    graph = ForwardGraph(enc_params, dec_params, enc_caches, dec_caches,
                         dec_hs, preds, targets, residual, sample_feedback,
                         detach_feedback)
    return loss, graph


def backward(graph: ForwardGraph) -> list:
    """Exact loss gradients for every parameter of the unrolled graph.

    Gradients flow through the residual connections and, unless
    ``detach_feedback``, through the fed-back samples into earlier decoder
    steps. Tied models accumulate encoder and decoder contributions into the
    single shared gradient set.

    Returns:
        list of (params, grads) pairs, one per distinct parameter set.
    """
    entries = {}
    for p in (graph.dec_params, graph.enc_params):
        if id(p) not in entries:
            entries[id(p)] = (p, grunet.zero_grads(p))
    dec_grads = entries[id(graph.dec_params)][1]
    enc_grads = entries[id(graph.enc_params)][1]

    preds, targets = graph.preds, graph.targets
    n_out = graph.dec_params.n_out
    batch, t_out = preds.shape[0], preds.shape[1]
    dpred = 2.0 * (preds - targets) / preds.size

    carry = (graph.sample_feedback and not graph.detach_feedback)
    dp_carry = np.zeros((batch, n_out))
    dh = np.zeros((batch, graph.dec_params.hidden))
    for t in reversed(range(t_out)):
        dp_total = dpred[:, t, :] + dp_carry
        dh = dh + grunet.output_decoder_backward(
            dp_total, graph.dec_hs[t], graph.dec_params, dec_grads)
        dx, dh = grunet.gru_cell_backward(
            dh, graph.dec_caches[t], graph.dec_params, dec_grads)
        if carry:
            dp_carry = dx[:, :n_out]
            if graph.residual:
                dp_carry = dp_carry + dp_total
        # At t == 0 the input frame is ground truth, so the carry dies there.

    for cache in reversed(graph.enc_caches):
        _, dh = grunet.gru_cell_backward(dh, cache, graph.enc_params, enc_grads)

    result = list(entries.values())
    for _, grads in result:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for tensor {name!r}")
    return result


def _flatten_grads(entries) -> dict:
    flat = {}
    for i, (_, grads) in enumerate(entries):
        for name, g in grads.items():
            flat[f"{i}:{name}"] = g
    return flat


def train(config: ModelConfig, split: dataio.DatasetSplit,
          stats: dataio.NormalizationStats, initial=None,
          log_every=0) -> TrainedModel:
    """Run the training loop: sample batch, forward, backward, clip, step.

    Fully deterministic in (config.seed, config, data). ``initial`` may carry
    an (encoder, decoder) pair to resume from; otherwise parameters are
    seeded fresh.

    Raises:
        NumericError: if the loss goes non-finite, naming the iteration.
    """
    config.validate()
    if config.n_joint_dims != stats.n_used:
        raise ConfigError(
            f"config expects {config.n_joint_dims} joint dims but the "
            f"normalization keeps {stats.n_used}")
    rng = np.random.default_rng(config.seed)
    if initial is not None:
        enc, dec = initial
        if config.tied and dec is not enc:
            raise ConfigError("tied model must share one parameter set")
    else:
        enc = grunet.init_params(rng, config.d_in, config.hidden,
                                 config.n_joint_dims)
        dec = enc if config.tied else grunet.init_params(
            rng, config.d_in, config.hidden, config.n_joint_dims)

    losses = []
    for it in range(config.iterations):
        tasks = dataio.make_training_batch(rng, split, stats, config)
        enc_in, targets, onehot = dataio.stack_tasks(tasks)
        loss, graph = forward(
            enc, dec, enc_in, targets, onehot,
            residual=config.residual,
            sample_feedback=config.sample_feedback,
            detach_feedback=config.detach_feedback)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite training loss at iteration {it}")
        entries = backward(graph)
        flat = numkernel.clip_gradients(_flatten_grads(entries),
                                        config.max_grad_norm)
        for i, (params, _) in enumerate(entries):
            tensors = params.tensors()
            numkernel.sgd_step(tensors,
                               {n: flat[f"{i}:{n}"] for n in tensors},
                               config.lr)
        losses.append(loss)
        if log_every and (it % log_every == 0 or it == config.iterations - 1):
            print(f"iteration {it}: loss {loss:.6f}")
    return TrainedModel(encoder=enc, decoder=dec, config=config, stats=stats,
                        loss_curve=np.array(losses))


def predict(model: TrainedModel, task: dataio.PredictionTask,
            t_out: int | None = None) -> np.ndarray:
    """Forecast from one task's conditioning window, denormalized.

    Returns:
        (t_out, dim) unnormalized frames at the full data width.
    """
    cfg = model.config
    if cfg.supervised and task.action_onehot is None:
        raise ConfigError("model is action-conditioned but the task has no one-hot")
    if not cfg.supervised and task.action_onehot is not None:
        raise ConfigError("task carries a one-hot but the model is unconditioned")
    seed = np.asarray(task.seed, dtype=np.float64)
    if seed.ndim != 2 or seed.shape[1] != cfg.d_in:
        raise ConfigError(
            f"task seed width {seed.shape} does not match model input {cfg.d_in}")
    if t_out is None:
        t_out = cfg.t_out
    h, _ = encode(seed[None, :, :], model.encoder)
    onehot = None if task.action_onehot is None else task.action_onehot[None, :]
    preds, _, _ = decode(h, seed[None, -1, :cfg.n_joint_dims], onehot, t_out,
                         model.decoder, residual=cfg.residual,
                         sample_feedback=True)
    return dataio.denormalize(preds[0], model.stats)


def save_model(path, model: TrainedModel):
    """Write parameters, config and normalization stats as one checkpoint."""
    tensors = {}
    if model.config.tied:
        tensors.update(model.encoder.tensors())
    else:
        tensors.update({f"enc/{n}": a for n, a in model.encoder.tensors().items()})
        tensors.update({f"dec/{n}": a for n, a in model.decoder.tensors().items()})
    tensors["stats/mean"] = model.stats.mean
    tensors["stats/std"] = model.stats.std
    tensors["stats/used_dims"] = model.stats.used_dims.astype(np.float64)
    tensors["loss_curve"] = np.asarray(model.loss_curve, dtype=np.float64)
    meta = {"config": numkernel.meta_json(model.config.to_dict())}
    numkernel.save_tensors(path, tensors, meta)


def load_model(path) -> TrainedModel:
    """Load a checkpoint, validating tensor shapes against its config."""
    tensors, meta = numkernel.load_tensors(path)
    if "config" not in meta:
        raise ConfigError(f"{path}: checkpoint has no config record")
    cfg = ModelConfig.from_dict(json.loads(meta["config"]))
    cfg.validate()
    shapes = grunet.expected_shapes(cfg.d_in, cfg.hidden, cfg.n_joint_dims)
    prefixes = ("",) if cfg.tied else ("enc/", "dec/")
    expected = {f"{p}{n}": s for p in prefixes for n, s in shapes.items()}
    numkernel.validate_shapes(tensors, expected, context=str(path))

    def build(prefix):
        return GruParams(**{n: tensors[f"{prefix}{n}"] for n in shapes})

    if cfg.tied:
        enc = build("")
        dec = enc
    else:
        enc, dec = build("enc/"), build("dec/")
    for key in ("stats/mean", "stats/std", "stats/used_dims"):
        if key not in tensors:
            raise ConfigError(f"{path}: checkpoint is missing {key!r}")
    stats = dataio.NormalizationStats(tensors["stats/mean"],
                                      tensors["stats/std"],
                                      tensors["stats/used_dims"] != 0.0)
    if stats.n_used != cfg.n_joint_dims:
        raise ConfigError(
            f"{path}: stats keep {stats.n_used} dims, config expects "
            f"{cfg.n_joint_dims}")
    loss_curve = tensors.get("loss_curve", np.zeros(0))
    return TrainedModel(encoder=enc, decoder=dec, config=cfg, stats=stats,
                        loss_curve=loss_curve)
