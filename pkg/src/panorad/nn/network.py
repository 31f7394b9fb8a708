"""Network assembly, the two model builders, and finite-difference checking."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericError
from .layers import Conv2d, Dense, Flatten, MaxPool2d, ReLU, Sigmoid, Softmax
from .losses import CLAMP, cross_entropy, cross_entropy_grad


@dataclass(frozen=True)
class InitSpec:
    """Uniform parameter initialization over [low, high]."""

    low: float = -0.05
    high: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not self.low < self.high:
            raise ConfigError(f"init range empty: [{self.low}, {self.high}]")


def shape_walk(layers, input_shape):
    """Per-layer output shapes (excluding batch), validating compatibility."""
    shapes = []
    cur = tuple(input_shape)
    for layer in layers:
        cur = layer.out_shape(cur)
        shapes.append(cur)
    return shapes


class Network:
    """An ordered layer stack with per-layer parameter dicts."""

    def __init__(self, layers, input_shape, init: InitSpec = None, dtype=np.float32):
        self.layers = tuple(layers)
        self.input_shape = tuple(input_shape)
        self.dtype = dtype
        shape_walk(self.layers, self.input_shape)  # validates
        init = init or InitSpec()
        rng = np.random.default_rng(init.seed)
        self.params = []
        cur = self.input_shape
        for layer in self.layers:
            self.params.append(layer.init_params(cur, rng, init, dtype))
            cur = layer.out_shape(cur)

    def output_shapes(self):
        return shape_walk(self.layers, self.input_shape)

    def param_count(self):
        return sum(int(p.size) for lp in self.params for p in lp.values())

    def astype(self, dtype):
        """Copy of the network with parameters cast to ``dtype``."""
        other = object.__new__(Network)
        other.layers = self.layers
        other.input_shape = self.input_shape
        other.dtype = dtype
        other.params = [
            {k: v.astype(dtype) for k, v in lp.items()} for lp in self.params
        ]
        return other

    def forward(self, x):
        """Run the stack; returns (output, caches for backward)."""
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ConfigError(
                f"batch shape {x.shape[1:]} != network input {self.input_shape}"
            )
        caches = []
        for layer, params in zip(self.layers, self.params):
            x, cache = layer.forward(x, params)
            caches.append(cache)
        if not np.all(np.isfinite(x)):
            raise NumericError("non-finite activations in forward pass")
        return x, caches

    def predict(self, x):
        return self.forward(x)[0]

    def backward(self, caches, grad_out):
        """Parameter gradients per layer (same structure as ``params``)."""
        grads = [None] * len(self.layers)
        g = np.asarray(grad_out, dtype=self.dtype)
        for i in range(len(self.layers) - 1, -1, -1):
            g, layer_grads = self.layers[i].backward(g, caches[i], self.params[i])
            grads[i] = layer_grads
        return grads


def build_4layer(input_shape, n_classes, head="softmax", init: InitSpec = None,
                 dtype=np.float32):
    """Small stack: two 3x3 convolutions, one pooling stage, two dense layers."""
    c, h, w = input_shape
    if h < 8 or w < 8:
        raise ConfigError(f"input must be at least 8x8, got {h}x{w}")
    if head not in ("softmax", "sigmoid"):
        raise ConfigError(f"head must be 'softmax' or 'sigmoid', got {head!r}")
    layers = [
        Conv2d(32, 3, 3, pad="same"),
        ReLU(),
        Conv2d(32, 3, 3, pad="same"),
        ReLU(),
        MaxPool2d(2),
        Flatten(),
        Dense(128),
        ReLU(),
        Dense(n_classes),
        Softmax() if head == "softmax" else Sigmoid(),
    ]
    return Network(layers, input_shape, init=init, dtype=dtype)


def vgg16_plan(n_classes, width_scale=1.0):
    """Layer list for the 13-conv/3-dense topology, channels scaled."""

    def ch(base):
        return max(1, round(base * width_scale))

    layers = []
    for block in ((64, 64), (128, 128), (256, 256, 256), (512, 512, 512), (512, 512, 512)):
        for base in block:
            layers += [Conv2d(ch(base), 3, 3, pad="same"), ReLU()]
        layers.append(MaxPool2d(2))
    layers += [
        Flatten(),
        Dense(ch(4096)),
        ReLU(),
        Dense(ch(4096)),
        ReLU(),
        Dense(n_classes),
        Softmax(),
    ]
    return layers


def build_16layer(input_shape, n_classes, width_scale=1.0, init: InitSpec = None,
                  dtype=np.float32):
    """Deep stack (13 conv + 3 dense, five 2x2 pools => /32 spatial)."""
    c, h, w = input_shape
    if h % 32 or w % 32:
        raise ConfigError(f"input dims must be divisible by 32, got {h}x{w}")
    return Network(vgg16_plan(n_classes, width_scale), input_shape, init=init, dtype=dtype)


def gradient_check(net: Network, x, targets, loss_kind, eps=1e-4,
                   samples_per_tensor=None, seed=0):
    """Max relative error between analytic and central-difference gradients.

    Runs the network in float64. Every parameter entry is checked when
    ``samples_per_tensor`` is None; otherwise a seeded sample per tensor
    keeps large networks affordable. Entries where both gradients are below
    1e-8 are treated as matching (finite-difference noise floor).

    A central difference only measures the derivative the analytic gradient
    computes while both probe points stay on the same piecewise-linear piece
    (same ReLU signs, pool argmaxes, and log-clamp region). When a probe
    flips any of those, the step shrinks (x8, a few times) until the
    activation pattern matches the unperturbed one.
    """
    net64 = net.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)

    def evaluate():
        out, caches = net64.forward(x)
        pattern = []
        for layer, cache in zip(net64.layers, caches):
            if isinstance(layer, ReLU):
                pattern.append(cache)
            elif isinstance(layer, MaxPool2d):
                pattern.append(cache[0])
        pattern.append((out > CLAMP) & (out < 1.0 - CLAMP))
        return cross_entropy(targets, out, loss_kind), pattern

    out, caches = net64.forward(x)
    grads = net64.backward(caches, cross_entropy_grad(targets, out, loss_kind))
    _, base_pattern = evaluate()

    def on_base_piece(pattern):
        return all(np.array_equal(a, b) for a, b in zip(pattern, base_pattern))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for layer_params, layer_grads in zip(net64.params, grads):
        for name in sorted(layer_params):
            p = layer_params[name]
            g = layer_grads[name]
            if samples_per_tensor is None or p.size <= samples_per_tensor:
                picks = np.arange(p.size)
            else:
                picks = rng.choice(p.size, size=samples_per_tensor, replace=False)
            for flat in picks:
                orig = p.flat[flat]
                step = eps
                for _ in range(4):
                    p.flat[flat] = orig + step
                    hi, pat_hi = evaluate()
                    p.flat[flat] = orig - step
                    lo, pat_lo = evaluate()
                    p.flat[flat] = orig
                    if on_base_piece(pat_hi) and on_base_piece(pat_lo):
                        break
                    step /= 8.0
                numeric = (hi - lo) / (2.0 * step)
                analytic = g.flat[flat]
                denom = max(abs(numeric), abs(analytic))
                # The difference quotient's rounding noise grows as the step
                # shrinks, so the measurable-signal floor scales with eps/step.
                if denom < 1e-8 * (eps / step):
                    continue
                worst = max(worst, abs(numeric - analytic) / denom)
    return worst
