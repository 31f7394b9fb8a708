"""Cross-entropy losses with clamped logs and matching gradients.

Predictions are clamped to [1e-7, 1 - 1e-7] before any logarithm; the
gradient is zeroed where the clamp is active (the clamped function is
locally constant there).
"""

import numpy as np

from ..errors import DataError

CLAMP = 1e-7
LOSS_KINDS = ("binary", "categorical")


def _check(t, o, kind):
    t = np.asarray(t, dtype=np.float64)
    o = np.asarray(o, dtype=np.float64)
    if kind not in LOSS_KINDS:
        raise DataError(f"unknown loss kind {kind!r}")
    if t.shape != o.shape:
        raise DataError(f"target shape {t.shape} != output shape {o.shape}")
    if t.size == 0:
        raise DataError("empty loss input")
    return t, o


def cross_entropy(t, o, kind="binary"):
    """Mean cross-entropy between targets ``t`` and predictions ``o``.

    binary: elementwise -(t log o + (1-t) log(1-o)), averaged over all
    elements. categorical: -sum_k t_k log o_k per row, averaged over rows.
    """
    t, o = _check(t, o, kind)
    oc = np.clip(o, CLAMP, 1.0 - CLAMP)
    if kind == "binary":
        return float(-(t * np.log(oc) + (1.0 - t) * np.log1p(-oc)).mean())
    rows = np.atleast_2d(t)
    return float(-(rows * np.log(np.atleast_2d(oc))).sum(axis=1).mean())


def cross_entropy_grad(t, o, kind="binary"):
    """d(loss)/do with the same averaging as :func:`cross_entropy`."""
    t, o = _check(t, o, kind)
    oc = np.clip(o, CLAMP, 1.0 - CLAMP)
    inside = (o > CLAMP) & (o < 1.0 - CLAMP)
    if kind == "binary":
        g = (-(t / oc) + (1.0 - t) / (1.0 - oc)) / t.size
    else:
        n = np.atleast_2d(t).shape[0]
        g = -(t / oc) / n
    return np.where(inside, g, 0.0)
