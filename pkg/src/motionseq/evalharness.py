"""Angle-space error at fixed millisecond horizons, plus report emission.

The error of one clip at one horizon is the L2 norm of the difference
between prediction and ground truth at the horizon frame, taken over all
joint-angle dimensions after the global translation/rotation block. By
default each joint's 3-vector is converted to Euler angles first; the
``expmap`` metric space compares the stored axis-angle values directly.
Per-clip values are averaged over the test clips of each action.
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rotmath
from .errors import EvaluationError, InvalidInputError

DEFAULT_HORIZONS_MS = (80, 160, 320, 400)
METRIC_SPACES = ("euler", "expmap")


def horizon_frame_index(horizon_ms: float, frame_interval: float) -> int:
    """0-based frame index of a millisecond horizon (80 ms -> index 1 at 25 fps)."""
    idx = int(round(horizon_ms / (frame_interval * 1000.0))) - 1
    if idx < 0:
        raise InvalidInputError(
            f"horizon {horizon_ms} ms is shorter than one frame")
    return idx


def pose_to_angles(frame, n_global_dims: int, metric_space: str) -> np.ndarray:
    """Angle representation of one frame's joint block."""
    frame = np.asarray(frame, dtype=np.float64)
    joints = frame[n_global_dims:]
    if metric_space == "expmap":
        return joints.copy()
    if metric_space != "euler":
        raise InvalidInputError(
            f"unknown metric space {metric_space!r}; expected {METRIC_SPACES}")
    if joints.size % 3 != 0:
        raise InvalidInputError(
            f"joint block of width {joints.size} is not made of 3-vectors")
    out = np.empty_like(joints)
    for j in range(0, joints.size, 3):
        out[j:j + 3] = rotmath.expmap_to_euler(joints[j:j + 3])
    return out


def mean_angle_error(pred, gt, horizons_ms=DEFAULT_HORIZONS_MS, *,
                     frame_interval=0.04, metric_space="euler",
                     n_global_dims=6) -> dict:
    """Per-horizon angle-space error of one predicted clip.

    Args:
        pred, gt: (t_out, dim) unnormalized frames of equal shape.

    Returns:
        dict mapping each horizon in ms to the L2 error at its frame.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 2:
        raise InvalidInputError(
            f"prediction shape {pred.shape} does not match ground truth "
            f"{gt.shape}")
    errors = {}
    for ms in horizons_ms:
        idx = horizon_frame_index(ms, frame_interval)
        if idx >= pred.shape[0]:
            raise InvalidInputError(
                f"horizon {ms} ms needs frame {idx + 1} but the clip has "
                f"{pred.shape[0]} frames")
        a = pose_to_angles(pred[idx], n_global_dims, metric_space)
        b = pose_to_angles(gt[idx], n_global_dims, metric_space)
        errors[ms] = float(np.linalg.norm(a - b))
    return errors


@dataclass
class ReportRow:
    action: str
    method: str
    horizon_ms: int
    error: float
    clip_count: int = 8


@dataclass
class EvalReport:
    """Per-(action, method, horizon) mean errors plus run provenance."""

    rows: list = field(default_factory=list)
    metric_space: str = "euler"
    clip_seed: int = -1

    def actions(self):
        seen = []
        for row in self.rows:
            if row.action not in seen:
                seen.append(row.action)
        return seen

    def methods(self):
        seen = []
        for row in self.rows:
            if row.method not in seen:
                seen.append(row.method)
        return seen

    def horizons(self):
        return sorted({row.horizon_ms for row in self.rows})

    def lookup(self, action, method, horizon_ms):
        for row in self.rows:
            if (row.action, row.method, row.horizon_ms) == (action, method, horizon_ms):
                return row.error
        raise KeyError((action, method, horizon_ms))


def evaluate(predict_fn, tasks_by_action: dict, horizons_ms=DEFAULT_HORIZONS_MS,
             *, method="", frame_interval=0.04, metric_space="euler",
             n_global_dims=6, clip_seed=-1) -> EvalReport:
    """Run a predictor over seeded test clips and average per action.

    ``predict_fn`` maps a PredictionTask to unnormalized full-width frames.
    Predictor failures are re-raised with the identity of the failing clip.
    """
    report = EvalReport(metric_space=metric_space, clip_seed=clip_seed)
    for action, tasks in tasks_by_action.items():
        sums = {ms: 0.0 for ms in horizons_ms}
        for task in tasks:
            try:
                pred = predict_fn(task)
            except Exception as exc:
                raise EvaluationError(
                    f"prediction failed on clip {task.action!r} subject "
                    f"{task.subject} trial {task.trial} start {task.start}: "
                    f"{exc}") from exc
            errs = mean_angle_error(pred, task.raw_target, horizons_ms,
                                    frame_interval=frame_interval,
                                    metric_space=metric_space,
                                    n_global_dims=n_global_dims)
            for ms, err in errs.items():
                sums[ms] += err
        for ms in horizons_ms:
            report.rows.append(ReportRow(action=action, method=method,
                                         horizon_ms=int(ms),
                                         error=sums[ms] / len(tasks),
                                         clip_count=len(tasks)))
    return report


def merge_reports(reports) -> EvalReport:
    """Combine reports of different methods evaluated on identical clips."""
    reports = list(reports)
    if not reports:
        raise InvalidInputError("nothing to merge")
    first = reports[0]
    for other in reports[1:]:
        if other.metric_space != first.metric_space or other.clip_seed != first.clip_seed:
            raise InvalidInputError(
                "cannot merge reports with different metric spaces or clip seeds")
    merged = EvalReport(metric_space=first.metric_space, clip_seed=first.clip_seed)
    for report in reports:
        merged.rows.extend(report.rows)
    return merged


def render_report_csv(report: EvalReport) -> str:
    """CSV with columns action,method,horizon_ms,error at full precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["action", "method", "horizon_ms", "error"])
    for row in report.rows:
        writer.writerow([row.action, row.method, row.horizon_ms,
                         repr(float(row.error))])
    return buf.getvalue()


def parse_report_csv(text: str) -> list:
    """Rows back from :func:`render_report_csv` output."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["action", "method", "horizon_ms", "error"]:
        raise InvalidInputError("unexpected report CSV header")
    return [ReportRow(action=a, method=m, horizon_ms=int(h), error=float(e))
            for a, m, h, e in reader]


def render_report_markdown(report: EvalReport) -> str:
    """Action-grouped markdown tables, methods as rows, 2-decimal errors."""
    horizons = report.horizons()
    lines = [
        f"Metric space: {report.metric_space}; clip seed: {report.clip_seed}",
        "",
    ]
    for action in report.actions():
        counts = {row.clip_count for row in report.rows if row.action == action}
        lines.append(f"### {action} ({', '.join(str(c) for c in sorted(counts))} clips)")
        lines.append("")
        lines.append("| milliseconds | " + " | ".join(str(h) for h in horizons) + " |")
        lines.append("|---" * (len(horizons) + 1) + "|")
        for m in report.methods():
            cells = []
            for h in horizons:
                try:
                    cells.append(f"{report.lookup(action, m, h):.2f}")
                except KeyError:
                    cells.append("-")
            lines.append(f"| {m} | " + " | ".join(cells) + " |")
        lines.append("")
    return "\n".join(lines)


def write_report(report: EvalReport, out_dir) -> dict:
    """Write report.csv and report.md under ``out_dir``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    md_path = out_dir / "report.md"
    csv_path.write_text(render_report_csv(report))
    md_path.write_text(render_report_markdown(report))
    return {"csv": csv_path, "markdown": md_path}
