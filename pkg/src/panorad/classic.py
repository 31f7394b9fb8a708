"""Classical classifiers: k-nearest-neighbors and pairwise multiclass SVM.

The SVM solves the soft-margin dual with sequential minimal optimization,
always updating the maximal violating pair. Multiclass classification
combines one-vs-one binary machines through an error-correcting output
code with hinge-loss-weighted decoding.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice; gamma=None means 1/dim, resolved against the data."""

    kind: str = "linear"
    gamma: float = None

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian"):
            raise ConfigError(f"unknown kernel {self.kind!r}")
        if self.gamma is not None and not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")

    def resolve_gamma(self, dim):
        if self.kind != "gaussian":
            return None
        return self.gamma if self.gamma is not None else 1.0 / dim


def kernel_matrix(spec: KernelSpec, a, b):
    """Gram matrix k(a_i, b_j) for row-sample matrices a and b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if spec.kind == "linear":
        return a @ b.T
    g = spec.resolve_gamma(a.shape[1])
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    d2 = np.maximum(aa + bb - 2.0 * (a @ b.T), 0.0)
    return np.exp(-g * d2)


@dataclass(frozen=True)
class KnnModel:
    train_x: np.ndarray
    train_y: np.ndarray
    k: int = 5

    def __post_init__(self):
        x = np.asarray(self.train_x, dtype=np.float64)
        y = np.asarray(self.train_y, dtype=np.intp).reshape(-1)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise DataError(f"train_x {x.shape} does not pair with train_y {y.shape}")
        if not 1 <= self.k <= x.shape[0]:
            raise ConfigError(f"k={self.k} out of range for n={x.shape[0]}")
        if y.size and y.min() < 0:
            raise DataError("labels must be non-negative class ids")
        object.__setattr__(self, "train_x", x)
        object.__setattr__(self, "train_y", y)


def knn_predict(model: KnnModel, x):
    """Majority vote over the k nearest neighbors (Euclidean).

    Vote ties break toward the tied class with the smaller summed distance
    inside the neighbor set, then toward the lower class id.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.train_x.shape[1]:
        raise DataError(f"query dim {x.shape[0]} != train dim {model.train_x.shape[1]}")
    diff = model.train_x - x
    d = np.sqrt((diff * diff).sum(axis=1))
    near = np.argsort(d, kind="stable")[: model.k]
    labels = model.train_y[near]
    counts = np.bincount(labels)
    best = counts.max()
    tied = np.flatnonzero(counts == best)
    if tied.size == 1:
        return int(tied[0])
    sums = np.array([d[near[labels == cls]].sum() for cls in tied])
    return int(tied[np.argmin(sums)])


@dataclass(frozen=True)
class BinarySvm:
    """Kernel expansion f(x) = sum_i alpha_y[i] k(support_x[i], x) + bias."""

    support_x: np.ndarray
    alpha_y: np.ndarray
    bias: float
    kernel: KernelSpec
    c: float
    converged: bool = True
    objective_history: tuple = ()  # dual objective per pair update, if tracked

    def __post_init__(self):
        sx = np.asarray(self.support_x, dtype=np.float64)
        ay = np.asarray(self.alpha_y, dtype=np.float64).reshape(-1)
        if sx.ndim != 2 or sx.shape[0] != ay.shape[0] or sx.shape[0] < 1:
            raise DataError("support vectors and multipliers must pair up")
        if np.abs(ay).max() > self.c * (1 + 1e-9):
            raise DataError("multiplier magnitude exceeds the box constraint")
        object.__setattr__(self, "support_x", sx)
        object.__setattr__(self, "alpha_y", ay)


def svm_train(
    x, y, kernel: KernelSpec, c=10.0, tol=1e-3, max_passes=100_000, track_objective=False
) -> BinarySvm:
    """Soft-margin SVM via SMO on the maximal violating pair.

    Stops when the duality-gap proxy m(alpha) - M(alpha) drops to ``tol``;
    if ``max_passes`` pair updates run out first the best-so-far machine is
    returned with ``converged=False``. Only multipliers above 1e-8 are kept.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DataError("x and y must pair up")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("labels must be -1/+1")
    if np.unique(y).size < 2:
        raise DataError("training data contains a single class")
    if c <= 0:
        raise ConfigError(f"box constraint must be positive, got c={c}")
    n = x.shape[0]
    k = kernel_matrix(kernel, x, x)
    q = (y[:, None] * y[None, :]) * k
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a)
    eps = 1e-12
    converged = False
    history = []
    for _ in range(max_passes):
        f = -y * grad
        up = ((y > 0) & (alpha < c - eps)) | ((y < 0) & (alpha > eps))
        low = ((y < 0) & (alpha < c - eps)) | ((y > 0) & (alpha > eps))
        if not up.any() or not low.any():
            converged = True
            break
        fi = np.where(up, f, -np.inf)
        fj = np.where(low, f, np.inf)
        i = int(np.argmax(fi))
        j = int(np.argmin(fj))
        if fi[i] - fj[j] <= tol:
            converged = True
            break
        quad = max(k[i, i] + k[j, j] - 2.0 * k[i, j], 1e-12)
        step = (f[i] - f[j]) / quad
        # Box limits for alpha_i += y_i*step, alpha_j -= y_j*step.
        hi_i = c - alpha[i] if y[i] > 0 else alpha[i]
        hi_j = alpha[j] if y[j] > 0 else c - alpha[j]
        step = min(step, hi_i, hi_j)
        di = y[i] * step
        dj = -y[j] * step
        alpha[i] += di
        alpha[j] += dj
        grad += q[:, i] * di + q[:, j] * dj
        if track_objective:
            history.append(float(alpha.sum() - 0.5 * alpha @ q @ alpha))
    f = -y * grad
    free = (alpha > eps) & (alpha < c - eps)
    if free.any():
        bias = float(f[free].mean())
    else:
        up = ((y > 0) & (alpha < c - eps)) | ((y < 0) & (alpha > eps))
        low = ((y < 0) & (alpha < c - eps)) | ((y > 0) & (alpha > eps))
        hi = f[up].max() if up.any() else 0.0
        lo = f[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    keep = alpha > 1e-8
    if not keep.any():
        # Degenerate but valid: decision function is the constant bias.
        keep = np.zeros(n, dtype=bool)
        keep[0] = True
        alpha = np.zeros(n)
    return BinarySvm(
        x[keep], alpha[keep] * y[keep], bias, kernel, c, converged, tuple(history)
    )


def svm_decision(model: BinarySvm, x) -> float:
    """Raw margin score; its sign is the binary prediction."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.support_x.shape[1]:
        raise DataError(f"query dim {x.shape[0]} != model dim {model.support_x.shape[1]}")
    return float(decision_batch(model, x[None, :])[0])


def decision_batch(model: BinarySvm, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.support_x.shape[1]:
        raise DataError(f"query dim {x.shape[1]} != model dim {model.support_x.shape[1]}")
    k = kernel_matrix(model.kernel, x, model.support_x)
    return k @ model.alpha_y + model.bias


def one_vs_one_coding(n_classes):
    """K x K(K-1)/2 matrix: column for pair (i, j), +1 at row i, -1 at row j."""
    pairs = [(i, j) for i in range(n_classes) for j in range(i + 1, n_classes)]
    coding = np.zeros((n_classes, len(pairs)), dtype=np.int8)
    for col, (i, j) in enumerate(pairs):
        coding[i, col] = 1
        coding[j, col] = -1
    return coding


@dataclass(frozen=True)
class EcocModel:
    coding: np.ndarray
    learners: tuple
    classes: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.coding, dtype=np.int8)
        k, n_learners = m.shape
        if len(self.learners) != n_learners:
            raise DataError("coding columns must pair with learners")
        if not ((m == 1).any(axis=0) & (m == -1).any(axis=0)).all():
            raise DataError("every coding column needs a positive and a negative class")
        if np.unique(m, axis=0).shape[0] != k:
            raise DataError("coding rows must be distinct")
        object.__setattr__(self, "coding", m)
        object.__setattr__(self, "classes", np.asarray(self.classes).reshape(-1))


def ecoc_train(x, y, kernel: KernelSpec, c=10.0, tol=1e-3, threads=1) -> EcocModel:
    """One-vs-one ECOC: one binary machine per class pair."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y).reshape(-1)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise DataError("need at least two classes")
    if counts.min() < 2:
        small = classes[counts.argmin()]
        raise DataError(f"class {small!r} has fewer than 2 samples")
    coding = one_vs_one_coding(classes.size)
    pairs = [(i, j) for i in range(classes.size) for j in range(i + 1, classes.size)]

    def fit(pair):
        i, j = pair
        mask = (y == classes[i]) | (y == classes[j])
        yy = np.where(y[mask] == classes[i], 1.0, -1.0)
        return svm_train(x[mask], yy, kernel, c=c, tol=tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            learners = tuple(pool.map(fit, pairs))
    else:
        learners = tuple(fit(p) for p in pairs)
    return EcocModel(coding, learners, classes)


def ecoc_scores(model: EcocModel, x):
    """Per-learner raw margins for a batch of query rows."""
    x = np.asarray(x, dtype=np.float64)
    return np.column_stack([decision_batch(m, x) for m in model.learners])


def decode_losses(coding, scores):
    """Hinge loss-weighted decoding: average hinge loss over relevant learners."""
    m = coding.astype(np.float64)
    hinge = np.maximum(0.0, 1.0 - m[None, :, :] * scores[:, None, :]) / 2.0
    weights = np.abs(m)
    return (weights[None] * hinge).sum(axis=2) / weights.sum(axis=1)[None, :]


def ecoc_predict(model: EcocModel, x):
    """Class with the smallest decoded loss; ties go to the lower class id."""
    single = np.asarray(x).ndim == 1
    xs = np.atleast_2d(np.asarray(x, dtype=np.float64))
    losses = decode_losses(model.coding, ecoc_scores(model, xs))
    idx = np.argmin(losses, axis=1)
    out = model.classes[idx]
    return out[0] if single else out
