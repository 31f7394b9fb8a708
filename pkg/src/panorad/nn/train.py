"""Mini-batch training loop with seeded shuffling and per-epoch history."""

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError, NumericError
from ..image_io import AugmentConfig, GrayImage, augment
from .losses import cross_entropy, cross_entropy_grad
from .network import Network
from .optim import make_optimizer


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch loss and accuracies; eval entries are NaN without an eval set."""

    loss: tuple
    train_acc: tuple
    eval_acc: tuple

    def __post_init__(self):
        if not len(self.loss) == len(self.train_acc) == len(self.eval_acc):
            raise DataError("history columns must have equal length")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loss", "train_acc", "eval_acc"])
            for i, (l, ta, ea) in enumerate(zip(self.loss, self.train_acc, self.eval_acc), 1):
                writer.writerow([i, f"{l:.6f}", f"{ta:.6f}", "" if np.isnan(ea) else f"{ea:.6f}"])


def _targets_and_labels(y, out_dim):
    y = np.asarray(y)
    if y.ndim == 2:  # explicit soft targets
        if y.shape[1] != out_dim:
            raise DataError(f"target width {y.shape[1]} != output width {out_dim}")
        t = y.astype(np.float64)
        labels = (t[:, 0] > 0.5).astype(np.intp) if out_dim == 1 else t.argmax(axis=1)
        return t, labels
    labels = y.astype(np.intp)
    if labels.min() < 0:
        raise DataError("labels must be non-negative")
    if out_dim == 1:
        if labels.max() > 1:
            raise DataError("single-output head needs binary labels")
        return labels.astype(np.float64)[:, None], labels
    if labels.max() >= out_dim:
        raise DataError(f"label {labels.max()} out of range for {out_dim} outputs")
    t = np.zeros((labels.size, out_dim), dtype=np.float64)
    t[np.arange(labels.size), labels] = 1.0
    return t, labels


def _predicted(outputs):
    if outputs.shape[1] == 1:
        return (outputs[:, 0] > 0.5).astype(np.intp)
    return outputs.argmax(axis=1)


def _augment_batch(xb, cfg: AugmentConfig, seed, epoch, indices):
    out = np.empty_like(xb)
    for row, i in enumerate(indices):
        derived = int(np.random.SeedSequence([cfg.seed, seed, epoch, int(i)]).generate_state(1)[0])
        per_image = AugmentConfig(
            mode=cfg.mode,
            shear_range=cfg.shear_range,
            zoom_range=cfg.zoom_range,
            seed=derived,
        )
        plane = np.clip(xb[row, 0], 0.0, 1.0).astype(np.float32)
        out[row, 0] = augment(GrayImage(plane), per_image).pixels
    return out


def train(net: Network, x, y, *, loss_kind, opt_kind="adadelta", epochs=10,
          batch_size=32, seed=0, augment_cfg: AugmentConfig = None,
          eval_x=None, eval_y=None, opt_kwargs=None) -> TrainHistory:
    """Seeded mini-batch training; deterministic for a fixed seed.

    ``y`` is either integer class labels or an explicit (n, out) target
    matrix. When ``augment_cfg`` is set each image is re-augmented every
    epoch with a seed derived from (config seed, run seed, epoch, index).
    """
    x = np.asarray(x, dtype=net.dtype)
    if x.ndim != 4 or x.shape[0] == 0:
        raise DataError(f"expected a nonempty (n, c, h, w) batch, got shape {x.shape}")
    if epochs < 1 or batch_size < 1:
        raise ConfigError("epochs and batch_size must be positive")
    out_dim = net.output_shapes()[-1][0]
    targets, labels = _targets_and_labels(y, out_dim)
    eval_labels = None
    if eval_x is not None:
        eval_x = np.asarray(eval_x, dtype=net.dtype)
        _, eval_labels = _targets_and_labels(eval_y, out_dim)
    do_augment = augment_cfg is not None and augment_cfg.mode != "none"
    if do_augment and x.shape[1] != 1:
        raise ConfigError("augmentation supports single-channel images only")

    opt = make_optimizer(opt_kind, **(opt_kwargs or {}))
    rng = np.random.default_rng(seed)
    n = x.shape[0]
    losses, train_accs, eval_accs = [], [], []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb = x[idx]
            if do_augment:
                xb = _augment_batch(xb, augment_cfg, seed, epoch, idx)
            out, caches = net.forward(xb)
            loss = cross_entropy(targets[idx], out, loss_kind)
            if not np.isfinite(loss):
                raise NumericError(f"loss diverged at epoch {epoch + 1}")
            grads = net.backward(caches, cross_entropy_grad(targets[idx], out, loss_kind))
            opt.step(net.params, grads)
            total_loss += loss * idx.size
            correct += int((_predicted(out) == labels[idx]).sum())
        losses.append(total_loss / n)
        train_accs.append(correct / n)
        if eval_labels is not None:
            eval_accs.append(evaluate_accuracy(net, eval_x, eval_labels, batch_size))
        else:
            eval_accs.append(float("nan"))
    return TrainHistory(tuple(losses), tuple(train_accs), tuple(eval_accs))


def evaluate_accuracy(net: Network, x, labels, batch_size=64):
    x = np.asarray(x, dtype=net.dtype)
    labels = np.asarray(labels, dtype=np.intp)
    correct = 0
    for start in range(0, x.shape[0], batch_size):
        out = net.predict(x[start:start + batch_size])
        correct += int((_predicted(out) == labels[start:start + batch_size]).sum())
    return correct / x.shape[0]
