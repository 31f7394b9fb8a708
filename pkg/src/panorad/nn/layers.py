"""Network layers: shape planning, initialization, forward, backward.

Activations use (n, c, h, w) for image stacks and (n, features) after
flattening. Convolution is cross-correlation (no kernel flip) realized as
an im2col matrix product; max pooling is non-overlapping with first-index
tie-breaking so its gradient is an exact partition of the pooled gradient.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DataError


def _as4d(shape):
    if len(shape) != 3:
        raise ConfigError(f"expected a (channels, h, w) shape, got {shape}")
    return shape


@dataclass(frozen=True)
class Conv2d:
    out_ch: int
    kh: int
    kw: int
    stride: int = 1
    pad: str = "same"

    def __post_init__(self):
        if self.out_ch < 1 or self.kh < 1 or self.kw < 1:
            raise ConfigError("conv channels and kernel dims must be >= 1")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.pad not in ("same", "valid"):
            raise ConfigError(f"pad must be 'same' or 'valid', got {self.pad!r}")

    def _geometry(self, h, w):
        if self.pad == "same":
            oh = -(-h // self.stride)
            ow = -(-w // self.stride)
            ph = max((oh - 1) * self.stride + self.kh - h, 0)
            pw = max((ow - 1) * self.stride + self.kw - w, 0)
        else:
            if h < self.kh or w < self.kw:
                raise ConfigError(f"kernel {self.kh}x{self.kw} exceeds input {h}x{w}")
            oh = (h - self.kh) // self.stride + 1
            ow = (w - self.kw) // self.stride + 1
            ph = pw = 0
        return oh, ow, (ph // 2, ph - ph // 2), (pw // 2, pw - pw // 2)

    def out_shape(self, in_shape):
        c, h, w = _as4d(in_shape)
        oh, ow, _, _ = self._geometry(h, w)
        return (self.out_ch, oh, ow)

    def init_params(self, in_shape, rng, init, dtype):
        c = _as4d(in_shape)[0]
        return {
            "w": rng.uniform(init.low, init.high, (self.out_ch, c, self.kh, self.kw)).astype(dtype),
            "b": rng.uniform(init.low, init.high, self.out_ch).astype(dtype),
        }

    def forward(self, x, params):
        n, c, h, w = x.shape
        oh, ow, (pt, pb), (pl, pr) = self._geometry(h, w)
        xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr))) if pt + pb + pl + pr else x
        win = np.lib.stride_tricks.sliding_window_view(xp, (self.kh, self.kw), axis=(2, 3))
        win = win[:, :, ::self.stride, ::self.stride]
        cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(
            n * oh * ow, c * self.kh * self.kw
        )
        wmat = params["w"].reshape(self.out_ch, -1)
        y = cols @ wmat.T + params["b"]
        y = y.reshape(n, oh, ow, self.out_ch).transpose(0, 3, 1, 2)
        cache = (cols, x.shape, (pt, pb, pl, pr), (oh, ow))
        return np.ascontiguousarray(y), cache

    def backward(self, gy, cache, params):
        cols, x_shape, (pt, pb, pl, pr), (oh, ow) = cache
        n, c, h, w = x_shape
        gmat = np.ascontiguousarray(gy.transpose(0, 2, 3, 1)).reshape(-1, self.out_ch)
        gw = (gmat.T @ cols).reshape(params["w"].shape)
        gb = gmat.sum(axis=0)
        gcols = gmat @ params["w"].reshape(self.out_ch, -1)
        g6 = gcols.reshape(n, oh, ow, c, self.kh, self.kw).transpose(0, 3, 4, 5, 1, 2)
        gxp = np.zeros((n, c, h + pt + pb, w + pl + pr), dtype=gy.dtype)
        s = self.stride
        for a in range(self.kh):
            for b in range(self.kw):
                gxp[:, :, a:a + s * oh:s, b:b + s * ow:s] += g6[:, :, a, b]
        gx = gxp[:, :, pt:pt + h, pl:pl + w]
        return np.ascontiguousarray(gx), {"w": gw, "b": gb}


@dataclass(frozen=True)
class ReLU:
    def out_shape(self, in_shape):
        return in_shape

    def init_params(self, in_shape, rng, init, dtype):
        return {}

    def forward(self, x, params):
        return np.maximum(x, 0), x > 0

    def backward(self, gy, cache, params):
        return gy * cache, {}


@dataclass(frozen=True)
class MaxPool2d:
    size: int = 2

    def __post_init__(self):
        if self.size < 2:
            raise ConfigError("pool size must be >= 2")

    def out_shape(self, in_shape):
        c, h, w = _as4d(in_shape)
        if h < self.size or w < self.size:
            raise ConfigError(f"pool {self.size} exceeds input {h}x{w}")
        return (c, h // self.size, w // self.size)

    def init_params(self, in_shape, rng, init, dtype):
        return {}

    def forward(self, x, params):
        n, c, h, w = x.shape
        s = self.size
        oh, ow = h // s, w // s
        blocks = x[:, :, : oh * s, : ow * s].reshape(n, c, oh, s, ow, s)
        flat = np.ascontiguousarray(blocks.transpose(0, 1, 2, 4, 3, 5)).reshape(
            n, c, oh, ow, s * s
        )
        idx = flat.argmax(axis=-1)
        y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        return y, (idx, x.shape)

    def backward(self, gy, cache, params):
        idx, x_shape = cache
        n, c, h, w = x_shape
        s = self.size
        oh, ow = h // s, w // s
        scat = np.zeros((n, c, oh, ow, s * s), dtype=gy.dtype)
        np.put_along_axis(scat, idx[..., None], gy[..., None], axis=-1)
        gx = np.zeros(x_shape, dtype=gy.dtype)
        gx[:, :, : oh * s, : ow * s] = (
            scat.reshape(n, c, oh, ow, s, s).transpose(0, 1, 2, 4, 3, 5).reshape(
                n, c, oh * s, ow * s
            )
        )
        return gx, {}


@dataclass(frozen=True)
class Flatten:
    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def init_params(self, in_shape, rng, init, dtype):
        return {}

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, gy, cache, params):
        return gy.reshape(cache), {}


@dataclass(frozen=True)
class Dense:
    out: int

    def __post_init__(self):
        if self.out < 1:
            raise ConfigError("dense width must be >= 1")

    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ConfigError(f"dense layer needs flat input, got shape {in_shape}")
        return (self.out,)

    def init_params(self, in_shape, rng, init, dtype):
        return {
            "w": rng.uniform(init.low, init.high, (in_shape[0], self.out)).astype(dtype),
            "b": rng.uniform(init.low, init.high, self.out).astype(dtype),
        }

    def forward(self, x, params):
        return x @ params["w"] + params["b"], x

    def backward(self, gy, cache, params):
        return gy @ params["w"].T, {"w": cache.T @ gy, "b": gy.sum(axis=0)}


@dataclass(frozen=True)
class Sigmoid:
    def out_shape(self, in_shape):
        return in_shape

    def init_params(self, in_shape, rng, init, dtype):
        return {}

    def forward(self, x, params):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        e = np.exp(x[~pos])
        out[~pos] = e / (1.0 + e)
        return out, out

    def backward(self, gy, cache, params):
        return gy * cache * (1.0 - cache), {}


@dataclass(frozen=True)
class Softmax:
    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ConfigError(f"softmax needs flat input, got shape {in_shape}")
        return in_shape

    def init_params(self, in_shape, rng, init, dtype):
        return {}

    def forward(self, x, params):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        out = e / e.sum(axis=1, keepdims=True)
        return out, out

    def backward(self, gy, cache, params):
        s = cache
        return s * (gy - (gy * s).sum(axis=1, keepdims=True)), {}


LAYER_KINDS = {
    "conv2d": Conv2d,
    "relu": ReLU,
    "maxpool2d": MaxPool2d,
    "flatten": Flatten,
    "dense": Dense,
    "sigmoid": Sigmoid,
    "softmax": Softmax,
}


def layer_kind(layer):
    for name, cls in LAYER_KINDS.items():
        if isinstance(layer, cls):
            return name
    raise DataError(f"unknown layer type {type(layer).__name__}")
