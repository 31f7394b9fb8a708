"""Report figures: every delimited report gets a rendered PNG companion."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError


def save_history_plot(path, history, title="training history"):
    """Loss and accuracy curves per epoch from a TrainHistory."""
    epochs = np.arange(1, len(history.loss) + 1)
    fig, ax_loss = plt.subplots(figsize=(7, 4.5))
    ax_loss.plot(epochs, history.loss, color="tab:red", label="loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss", color="tab:red")
    ax_acc = ax_loss.twinx()
    ax_acc.plot(epochs, history.train_acc, color="tab:blue", label="train accuracy")
    eval_acc = np.asarray(history.eval_acc, dtype=np.float64)
    if np.isfinite(eval_acc).any():
        ax_acc.plot(epochs, eval_acc, color="tab:green", label="eval accuracy")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0.0, 1.05)
    lines, labels = [], []
    for ax in (ax_loss, ax_acc):
        ln, lb = ax.get_legend_handles_labels()
        lines += ln
        labels += lb
    ax_acc.legend(lines, labels, loc="lower right")
    ax_loss.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def save_curve_plot(path, xs, series, xlabel, title="accuracy sweep"):
    """One accuracy curve per named series over a shared x axis."""
    if not series:
        raise DataError("no series to plot")
    xs = list(xs)
    for name, ys in series.items():
        if len(ys) != len(xs):
            raise DataError(
                f"series {name!r} has {len(ys)} points for {len(xs)} x values"
            )
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, ys in series.items():
        ax.plot(xs, ys, marker="o", label=str(name))
    ax.set_xlabel(xlabel)
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def save_confusion_plot(path, cm, names=None, title="confusion matrix"):
    """Heat map of a ConfusionMatrix with class tick labels."""
    counts = cm.counts
    k = counts.shape[0]
    names = list(names) if names else [str(i) for i in range(k)]
    fig, ax = plt.subplots(figsize=(max(5, k * 0.35), max(4, k * 0.3)))
    im = ax.imshow(counts, cmap="viridis")
    ax.set_xticks(range(k), names, rotation=90, fontsize=7)
    ax.set_yticks(range(k), names, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
