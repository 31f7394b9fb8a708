"""Single-neuron building blocks: logistic unit, threshold unit, Hebb rule."""

import numpy as np

from ..errors import DataError


def sigmoid(t):
    """Logistic function 1 / (1 + e^-t), computed stably for large |t|."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def perceptron_output(x, w, threshold):
    """Threshold unit: 1 iff w . x strictly exceeds the threshold."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if x.shape != w.shape:
        raise DataError(f"input dim {x.shape[0]} != weight dim {w.shape[0]}")
    return 1 if float(w @ x) > threshold else 0


def hebbian_weights(patterns):
    """Correlation learning: w_ij = (1/p) sum_k x_i^k x_j^k."""
    p = np.asarray(patterns, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1:
        raise DataError(f"expected (p, n) pattern matrix, got shape {p.shape}")
    return p.T @ p / p.shape[0]
