"""Gradient-descent update rules with per-parameter running accumulators."""

import numpy as np

from ..errors import ConfigError


class AdaDelta:
    """Accumulates decayed squared gradients and squared updates.

    delta = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    """

    def __init__(self, rho=0.95, eps=1e-6):
        self.rho = rho
        self.eps = eps
        self._eg2 = {}
        self._edx2 = {}

    def step(self, params, grads):
        for li, (p_layer, g_layer) in enumerate(zip(params, grads)):
            for name, g in g_layer.items():
                p = p_layer[name]
                key = (li, name)
                eg2 = self._eg2.setdefault(key, np.zeros_like(p, dtype=np.float64))
                edx2 = self._edx2.setdefault(key, np.zeros_like(p, dtype=np.float64))
                g = g.astype(np.float64)
                eg2 *= self.rho
                eg2 += (1.0 - self.rho) * g * g
                delta = -np.sqrt(edx2 + self.eps) / np.sqrt(eg2 + self.eps) * g
                edx2 *= self.rho
                edx2 += (1.0 - self.rho) * delta * delta
                p += delta.astype(p.dtype)


class RmsProp:
    """Decayed squared-gradient scaling: delta = -lr * g / sqrt(E[g^2] + eps)."""

    def __init__(self, lr=0.001, rho=0.9, eps=1e-8):
        self.lr = lr
        self.rho = rho
        self.eps = eps
        self._eg2 = {}

    def step(self, params, grads):
        for li, (p_layer, g_layer) in enumerate(zip(params, grads)):
            for name, g in g_layer.items():
                p = p_layer[name]
                key = (li, name)
                eg2 = self._eg2.setdefault(key, np.zeros_like(p, dtype=np.float64))
                g = g.astype(np.float64)
                eg2 *= self.rho
                eg2 += (1.0 - self.rho) * g * g
                delta = -self.lr * g / np.sqrt(eg2 + self.eps)
                p += delta.astype(p.dtype)


OPTIMIZERS = {"adadelta": AdaDelta, "rmsprop": RmsProp}


def make_optimizer(kind, **kwargs):
    if kind not in OPTIMIZERS:
        raise ConfigError(f"unknown optimizer {kind!r} (choose from {sorted(OPTIMIZERS)})")
    return OPTIMIZERS[kind](**kwargs)
