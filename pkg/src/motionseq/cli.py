"""Command-line interface tying the pipeline together.

Subcommands: ``train`` (fit a model, write a checkpoint and loss curve),
``eval`` (angle-space errors of a checkpoint or a named baseline),
``baseline`` (all non-learned baselines on one set of clips), ``predict``
(export forecast frames in the text sequence format). Every command funnels
its randomness through ``--seed`` and writes its artifacts plus the resolved
configuration under one run directory.
"""

import functools
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import baselines, dataio, evalharness, plots, seq2seq
from .config import DEFAULT_GLOBAL_DIMS, H36M_ACTIONS, ModelConfig
from .errors import MotionseqError


def _positive(kind):
    def check(ctx, param, value):
        if value is not None and not value > 0:
            raise click.BadParameter(f"must be a positive {kind}")
        return value
    return check


def _non_negative(ctx, param, value):
    if value is not None and value < 0:
        raise click.BadParameter("must be non-negative")
    return value


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (MotionseqError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return wrapper


def _resolve_actions(action, actions):
    if action and actions:
        raise click.UsageError("pass either --action or --actions, not both")
    if action:
        if action == "all":
            return list(H36M_ACTIONS)
        return [action]
    if actions:
        return [a.strip() for a in actions.split(",") if a.strip()]
    raise click.UsageError("one of --action or --actions is required")


def _parse_horizons(text):
    try:
        horizons = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise click.BadParameter("horizons must be comma-separated integers")
    if not horizons or any(h <= 0 for h in horizons):
        raise click.BadParameter("horizons must be positive milliseconds")
    return horizons


def _run_dir(out_dir, command, payload, seed):
    """Create the run directory and echo the resolved configuration into it."""
    if out_dir:
        path = Path(out_dir)
    else:
        digest = hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode()).hexdigest()[:10]
        path = Path("runs") / f"{command}-{digest}-seed{seed}"
    path.mkdir(parents=True, exist_ok=True)
    (path / "config.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return path


def _load_split(data_root, actions, global_dims, eps, downsample):
    split = dataio.load_split(data_root, actions=actions,
                              downsample_factor=downsample)
    stats = dataio.compute_normalization(
        split.train, eps=eps, exclude_dims=range(global_dims))
    return split, stats


def _data_options(fn):
    fn = click.option("--data-root", envvar="MOTIONSEQ_DATA_ROOT",
                      required=True,
                      help="Directory of S<subject>/<action>_<trial>.txt files "
                           "(env MOTIONSEQ_DATA_ROOT).")(fn)
    fn = click.option("--global-dims", default=DEFAULT_GLOBAL_DIMS,
                      callback=_non_negative, show_default=True,
                      help="Leading global translation/rotation dims kept out "
                           "of the model and the metric.")(fn)
    fn = click.option("--eps", default=1e-4, callback=_positive("float"),
                      show_default=True,
                      help="Std threshold below which a dimension is constant.")(fn)
    fn = click.option("--downsample", default=2, callback=_positive("integer"),
                      show_default=True, help="Keep every n-th raw frame.")(fn)
    return fn


@click.group()
def main():
    """Motion forecasting with a residual sequence-to-sequence GRU."""


@main.command()
@_data_options
@click.option("--action", default=None,
              help="Single action, or 'all' for the full 15-action set.")
@click.option("--actions", default=None, help="Comma-separated action list.")
@click.option("--supervised", is_flag=True,
              help="Append a one-hot action vector to every input frame.")
@click.option("--residual/--no-residual", default=True, show_default=True,
              help="Predict deltas added to the input frame.")
@click.option("--sampling-loss/--teacher-forcing", "sampling_loss",
              default=True, show_default=True,
              help="Feed the decoder its own samples while training.")
@click.option("--tied/--untied", default=True, show_default=True,
              help="Share encoder and decoder weights.")
@click.option("--hidden", default=1024, callback=_positive("integer"),
              show_default=True)
@click.option("--lr", default=None, type=float, callback=_positive("float"),
              help="Learning rate [default: 0.05 single-action, "
                   "0.005 multi-action].")
@click.option("--batch", default=16, callback=_positive("integer"),
              show_default=True)
@click.option("--iterations", default=10000, callback=_non_negative,
              show_default=True)
@click.option("--seq-in", default=50, callback=_positive("integer"),
              show_default=True, help="Conditioning frames (2 s at 25 fps).")
@click.option("--seq-out", default=10, callback=_positive("integer"),
              show_default=True, help="Predicted frames (10=400 ms, 25=1 s).")
@click.option("--max-grad-norm", default=5.0, callback=_positive("float"),
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--log-every", default=100, callback=_non_negative,
              show_default=True)
@click.option("--out-dir", default=None, help="Run directory [default: runs/<auto>].")
@_handle_errors
def train(data_root, global_dims, eps, downsample, action, actions, supervised,
          residual, sampling_loss, tied, hidden, lr, batch, iterations,
          seq_in, seq_out, max_grad_norm, seed, log_every, out_dir):
    """Train a model and write checkpoint, loss curve and figures."""
    action_list = _resolve_actions(action, actions)
    if lr is None:
        lr = 0.005 if len(action_list) > 1 else 0.05
    split, stats = _load_split(data_root, action_list, global_dims, eps,
                               downsample)
    cfg = ModelConfig(
        n_joint_dims=stats.n_used, hidden=hidden, supervised=supervised,
        actions=tuple(action_list), residual=residual, tied=tied,
        sample_feedback=sampling_loss, t_in=seq_in, t_out=seq_out, lr=lr,
        batch_size=batch, max_grad_norm=max_grad_norm, iterations=iterations,
        seed=seed).validate()
    payload = {"command": "train", "data_root": str(data_root),
               "global_dims": global_dims, "eps": eps,
               "downsample": downsample, "config": cfg.to_dict()}
    run_dir = _run_dir(out_dir, "train", payload, seed)
    click.echo(f"training {len(action_list)} action(s), input width {cfg.d_in}, "
               f"hidden {cfg.hidden}, lr {cfg.lr}")
    model = seq2seq.train(cfg, split, stats, log_every=log_every)
    ckpt = run_dir / "model.ckpt"
    seq2seq.save_model(ckpt, model)
    loss_csv = run_dir / "loss.csv"
    lines = ["iteration,loss"]
    lines += [f"{i},{repr(float(v))}" for i, v in enumerate(model.loss_curve)]
    loss_csv.write_text("\n".join(lines) + "\n")
    plots.save_loss_curve(model.loss_curve, run_dir / "loss_curve.png")
    click.echo(f"checkpoint: {ckpt}")
    click.echo(f"loss curve: {loss_csv}")


def _select_clips(seed, split, stats, cfg, actions, clips):
    rng = np.random.default_rng(seed)
    return dataio.select_test_clips(rng, split, stats, cfg, actions=actions,
                                    clips_per_action=clips)


def _emit_report(report, run_dir):
    paths = evalharness.write_report(report, run_dir)
    figures = plots.save_error_curves(report, run_dir)
    click.echo(evalharness.render_report_markdown(report))
    click.echo(f"report: {paths['csv']}")
    for fig in figures:
        click.echo(f"figure: {fig}")


@main.command(name="eval")
@_data_options
@click.option("--checkpoint", default=None, help="Model checkpoint to score.")
@click.option("--baseline", "baseline_name", default=None,
              type=click.Choice(baselines.BASELINE_NAMES),
              help="Score a non-learned baseline instead of a checkpoint.")
@click.option("--action", default=None)
@click.option("--actions", default=None)
@click.option("--seq-in", default=50, callback=_positive("integer"),
              show_default=True, help="Conditioning frames (baseline mode).")
@click.option("--seq-out", default=10, callback=_positive("integer"),
              show_default=True, help="Predicted frames (baseline mode).")
@click.option("--horizons", default="80,160,320,400", show_default=True)
@click.option("--metric-space", default="euler",
              type=click.Choice(evalharness.METRIC_SPACES), show_default=True)
@click.option("--clips", default=8, callback=_positive("integer"),
              show_default=True, help="Test clips per action.")
@click.option("--avg-autoregressive", is_flag=True,
              help="Running averages feed back their own predictions.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", default=None)
@_handle_errors
def cmd_eval(data_root, global_dims, eps, downsample, checkpoint,
             baseline_name, action, actions, seq_in, seq_out, horizons,
             metric_space, clips, avg_autoregressive, seed, out_dir):
    """Evaluate a checkpoint or baseline on seeded test clips."""
    if (checkpoint is None) == (baseline_name is None):
        raise click.UsageError("pass exactly one of --checkpoint or --baseline")
    horizons = _parse_horizons(horizons)
    if checkpoint is not None:
        model = seq2seq.load_model(checkpoint)
        cfg, stats = model.config, model.stats
        action_list = (_resolve_actions(action, actions)
                       if (action or actions) else list(cfg.actions))
        split = dataio.load_split(data_root, actions=action_list,
                                  downsample_factor=downsample)
        predict_fn = lambda task: seq2seq.predict(model, task)  # noqa: E731
        method = Path(checkpoint).stem
    else:
        action_list = _resolve_actions(action, actions)
        split, stats = _load_split(data_root, action_list, global_dims, eps,
                                   downsample)
        cfg = ModelConfig(n_joint_dims=stats.n_used, supervised=False,
                          actions=tuple(action_list), t_in=seq_in,
                          t_out=seq_out).validate()
        predict_fn = baselines.as_predictor(baseline_name, stats, cfg.t_out,
                                            autoregressive=avg_autoregressive)
        method = baseline_name
    tasks = _select_clips(seed, split, stats, cfg, action_list, clips)
    frame_interval = split.test[0].frame_interval
    payload = {"command": "eval", "data_root": str(data_root),
               "method": method, "actions": action_list,
               "horizons": list(horizons), "metric_space": metric_space,
               "clips": clips, "seed": seed, "global_dims": global_dims,
               "config": cfg.to_dict()}
    run_dir = _run_dir(out_dir, "eval", payload, seed)
    report = evalharness.evaluate(
        predict_fn, tasks, horizons, method=method,
        frame_interval=frame_interval, metric_space=metric_space,
        n_global_dims=global_dims, clip_seed=seed)
    _emit_report(report, run_dir)


@main.command()
@_data_options
@click.option("--names", default=",".join(baselines.BASELINE_NAMES),
              show_default=True, help="Baselines to score, comma-separated.")
@click.option("--action", default=None)
@click.option("--actions", default=None)
@click.option("--seq-in", default=50, callback=_positive("integer"),
              show_default=True)
@click.option("--seq-out", default=10, callback=_positive("integer"),
              show_default=True)
@click.option("--horizons", default="80,160,320,400", show_default=True)
@click.option("--metric-space", default="euler",
              type=click.Choice(evalharness.METRIC_SPACES), show_default=True)
@click.option("--clips", default=8, callback=_positive("integer"),
              show_default=True)
@click.option("--avg-autoregressive", is_flag=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", default=None)
@_handle_errors
def baseline(data_root, global_dims, eps, downsample, names, action, actions,
             seq_in, seq_out, horizons, metric_space, clips,
             avg_autoregressive, seed, out_dir):
    """Compare the non-learned baselines on one shared set of clips."""
    horizons = _parse_horizons(horizons)
    name_list = [n.strip() for n in names.split(",") if n.strip()]
    action_list = _resolve_actions(action, actions)
    split, stats = _load_split(data_root, action_list, global_dims, eps,
                               downsample)
    cfg = ModelConfig(n_joint_dims=stats.n_used, supervised=False,
                      actions=tuple(action_list), t_in=seq_in,
                      t_out=seq_out).validate()
    tasks = _select_clips(seed, split, stats, cfg, action_list, clips)
    frame_interval = split.test[0].frame_interval
    payload = {"command": "baseline", "data_root": str(data_root),
               "methods": name_list, "actions": action_list,
               "horizons": list(horizons), "metric_space": metric_space,
               "clips": clips, "seed": seed, "global_dims": global_dims}
    run_dir = _run_dir(out_dir, "baseline", payload, seed)
    reports = []
    for name in name_list:
        predict_fn = baselines.as_predictor(name, stats, cfg.t_out,
                                            autoregressive=avg_autoregressive)
        reports.append(evalharness.evaluate(
            predict_fn, tasks, horizons, method=name,
            frame_interval=frame_interval, metric_space=metric_space,
            n_global_dims=global_dims, clip_seed=seed))
    _emit_report(evalharness.merge_reports(reports), run_dir)


@main.command()
@_data_options
@click.option("--checkpoint", required=True)
@click.option("--action", required=True)
@click.option("--subject", default=5, show_default=True)
@click.option("--trial", default=1, show_default=True)
@click.option("--start", default=0, callback=_non_negative, show_default=True,
              help="Start frame of the conditioning window.")
@click.option("--seq-out", default=None, type=int,
              callback=_positive("integer"),
              help="Frames to predict [default: checkpoint setting].")
@click.option("--out-dir", default=None)
@_handle_errors
def predict(data_root, global_dims, eps, downsample, checkpoint, action,
            subject, trial, start, seq_out, out_dir):
    """Export predicted frames for one clip in the text sequence format."""
    model = seq2seq.load_model(checkpoint)
    cfg = model.config
    t_out = seq_out if seq_out is not None else cfg.t_out
    split = dataio.load_split(data_root, actions=[action],
                              downsample_factor=downsample)
    matches = [s for s in split.test + split.train
               if (s.action, s.subject, s.trial) == (action, subject, trial)]
    if not matches:
        raise MotionseqError(
            f"no sequence for action {action!r} subject {subject} trial {trial}")
    seq = matches[0]
    task = dataio.slice_task(seq, start, cfg.t_in, t_out, model.stats)
    if cfg.supervised:
        task = dataio.append_action_onehot(task, cfg.action_index(action),
                                           cfg.num_actions)
    frames = seq2seq.predict(model, task, t_out=t_out)
    payload = {"command": "predict", "checkpoint": str(checkpoint),
               "action": action, "subject": subject, "trial": trial,
               "start": start, "seq_out": t_out}
    run_dir = _run_dir(out_dir, "predict", payload, cfg.seed)
    out_path = run_dir / f"pred_{action}_S{subject}_T{trial}_f{start}.txt"
    dataio.write_sequence(frames, out_path)
    click.echo(f"prediction: {out_path}")


if __name__ == "__main__":
    main()
