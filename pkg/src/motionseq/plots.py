"""Matplotlib figure output rendered next to the delimited reports."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def save_error_curves(report, out_dir) -> list:
    """One error-vs-horizon PNG per action, one line per method."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    horizons = report.horizons()
    paths = []
    for action in report.actions():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for method in report.methods():
            errs = []
            for h in horizons:
                try:
                    errs.append(report.lookup(action, method, h))
                except KeyError:
                    errs.append(float("nan"))
            ax.plot(horizons, errs, marker="o", label=method)
        ax.set_xlabel("horizon (ms)")
        ax.set_ylabel(f"mean angle error ({report.metric_space})")
        ax.set_title(action)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"errors_{action}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def save_loss_curve(loss_curve, path) -> Path:
    """Training-loss-per-iteration PNG on a log scale."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(loss_curve)
    if len(loss_curve) and min(loss_curve) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
