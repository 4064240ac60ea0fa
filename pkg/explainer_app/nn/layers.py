"""Layer vocabulary of the runtime: conv2d, relu, maxpool2d, flatten, dense, log-softmax.

Layers are stateless: parameters live in plain dicts owned by the model, and
``forward`` returns a cache that ``backward`` consumes. Spatial activations
are NCHW float64 arrays, flat ones are (N, features).
"""
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import as_strided

from explainer_app.exceptions import ShapeError, UnsupportedLayerError
from explainer_app.models import LayerKind


@dataclass(frozen=True)
class LayerSpec:
    kind:         str
    out_channels: int | None = None
    kernel_size:  int | None = None
    stride:       int | None = None
    padding:      int | None = None
    window:       int | None = None
    units:        int | None = None

    def __post_init__(self):
        if self.kind not in LayerKind.values:
            raise UnsupportedLayerError(f"unsupported layer kind {self.kind!r}", kind=self.kind)
        if self.kind == LayerKind.CONV2D:
            object.__setattr__(self, "stride", 1 if self.stride is None else self.stride)
            object.__setattr__(self, "padding", 0 if self.padding is None else self.padding)
            self._require_positive("out_channels", "kernel_size", "stride")
            if not 0 <= self.padding < self.kernel_size:
                raise ShapeError("conv padding must be in [0, kernel_size)", dimension="padding")
        elif self.kind == LayerKind.MAXPOOL2D:
            object.__setattr__(self, "stride", self.window if self.stride is None else self.stride)
            self._require_positive("window", "stride")
        elif self.kind == LayerKind.DENSE:
            self._require_positive("units")

    def _require_positive(self, *names):
        for name in names:
            value = getattr(self, name)
            if value is None or int(value) <= 0:
                raise ShapeError(f"{self.kind} needs a positive {name}", dimension=name)

    @property
    def spatial(self):
        return self.kind in (LayerKind.CONV2D, LayerKind.MAXPOOL2D, LayerKind.RELU)

    def to_dict(self):
        return {key: value for key, value in asdict(self).items() if value is not None}

    @classmethod
    def from_dict(cls, data):
        return cls(**{key: data[key] for key in (
            "kind", "out_channels", "kernel_size", "stride", "padding", "window", "units",
        ) if data.get(key) is not None})


def conv2d(out_channels, kernel_size, stride=1, padding=0):
    return LayerSpec(LayerKind.CONV2D, out_channels=out_channels, kernel_size=kernel_size,
                     stride=stride, padding=padding)

def relu():
    return LayerSpec(LayerKind.RELU)

def maxpool2d(window, stride=None):
    return LayerSpec(LayerKind.MAXPOOL2D, window=window, stride=stride)

def flatten():
    return LayerSpec(LayerKind.FLATTEN)

def dense(units):
    return LayerSpec(LayerKind.DENSE, units=units)

def log_softmax():
    return LayerSpec(LayerKind.LOG_SOFTMAX)


def _windows(x, kernel, stride):
    """Read-only (N, C, OH, OW, k, k) view of every kernel window."""
    n, c, h, w = x.shape
    out_h = (h - kernel) // stride + 1
    out_w = (w - kernel) // stride + 1
    sn, sc, sh, sw = x.strides
    return as_strided(
        x, (n, c, out_h, out_w, kernel, kernel),
        (sn, sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )


class Layer:
    def __init__(self, spec):
        self.spec = spec

    def output_shape(self, in_shape):
        return in_shape

    def param_shapes(self, in_shape):
        return {}

    def init_params(self, in_shape, rng):
        return {}

    def forward(self, x, params):
        raise NotImplementedError

    def backward(self, dy, cache, params):
        raise NotImplementedError


class Conv2d(Layer):
    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError("conv2d needs a spatial (C, H, W) input", dimension="rank")
        c, h, w = in_shape
        k, s, p = self.spec.kernel_size, self.spec.stride, self.spec.padding
        out_h = (h + 2 * p - k) // s + 1
        out_w = (w + 2 * p - k) // s + 1
        if out_h <= 0 or out_w <= 0:
            raise ShapeError(f"kernel {k} does not fit a {h}x{w} input", dimension="kernel_size")
        return (self.spec.out_channels, out_h, out_w)

    def param_shapes(self, in_shape):
        k = self.spec.kernel_size
        return {"weight": (self.spec.out_channels, in_shape[0], k, k),
                "bias": (self.spec.out_channels,)}

    def init_params(self, in_shape, rng):
        shapes = self.param_shapes(in_shape)
        bound = 1.0 / np.sqrt(in_shape[0] * self.spec.kernel_size ** 2)
        return {name: rng.uniform(-bound, bound, size=shape) for name, shape in shapes.items()}

    def _padded(self, x):
        p = self.spec.padding
        if p == 0:
            return x
        return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))

    def forward(self, x, params):
        windows = _windows(self._padded(x), self.spec.kernel_size, self.spec.stride)
        out = np.tensordot(windows, params["weight"], axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + params["bias"][None, :, None, None]
        return np.ascontiguousarray(out), (x.shape, windows)

    def backward(self, dy, cache, params):
        in_shape, windows = cache
        k, s, p = self.spec.kernel_size, self.spec.stride, self.spec.padding
        weight = params["weight"]
        grads = {
            "weight": np.tensordot(dy, windows, axes=([0, 2, 3], [0, 2, 3])),
            "bias": dy.sum(axis=(0, 2, 3)),
        }
        n, c, h, w = in_shape
        out_h, out_w = dy.shape[2], dy.shape[3]
        dx = np.zeros((n, c, h + 2 * p, w + 2 * p))
        for ki in range(k):
            for kj in range(k):
                contribution = np.tensordot(dy, weight[:, :, ki, kj], axes=([1], [0]))
                dx[:, :, ki:ki + s * (out_h - 1) + 1:s, kj:kj + s * (out_w - 1) + 1:s] += \
                    contribution.transpose(0, 3, 1, 2)
        if p:
            dx = dx[:, :, p:p + h, p:p + w]
        return np.ascontiguousarray(dx), grads


class ReLU(Layer):
    def forward(self, x, params):
        return np.maximum(x, 0.0), x > 0.0

    def backward(self, dy, cache, params):
        return dy * cache, {}


class MaxPool2d(Layer):
    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError("maxpool2d needs a spatial (C, H, W) input", dimension="rank")
        c, h, w = in_shape
        k, s = self.spec.window, self.spec.stride
        out_h, out_w = (h - k) // s + 1, (w - k) // s + 1
        if out_h <= 0 or out_w <= 0:
            raise ShapeError(f"pool window {k} does not fit a {h}x{w} input", dimension="window")
        return (c, out_h, out_w)

    def forward(self, x, params):
        k, s = self.spec.window, self.spec.stride
        windows = _windows(x, k, s)
        flat = windows.reshape(windows.shape[:4] + (k * k,))
        # argmax keeps the first maximum in scan order, which fixes the tie rule
        winner = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, winner[..., None], axis=-1)[..., 0]
        return out, (x.shape, winner)

    def backward(self, dy, cache, params):
        in_shape, winner = cache
        k, s = self.spec.window, self.spec.stride
        n, c, out_h, out_w = winner.shape
        ni, ci, hi, wi = np.indices((n, c, out_h, out_w), sparse=True)
        rows = hi * s + winner // k
        cols = wi * s + winner % k
        dx = np.zeros(in_shape)
        np.add.at(dx, (ni, ci, rows, cols), dy)
        return dx, {}


class Flatten(Layer):
    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, params):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, cache, params):
        return dy.reshape(cache), {}


class Dense(Layer):
    def output_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError("dense needs a flat input; add a flatten layer", dimension="rank")
        return (self.spec.units,)

    def param_shapes(self, in_shape):
        return {"weight": (in_shape[0], self.spec.units), "bias": (self.spec.units,)}

    def init_params(self, in_shape, rng):
        bound = 1.0 / np.sqrt(in_shape[0])
        return {name: rng.uniform(-bound, bound, size=shape)
                for name, shape in self.param_shapes(in_shape).items()}

    def forward(self, x, params):
        return x @ params["weight"] + params["bias"], x

    def backward(self, dy, cache, params):
        grads = {"weight": cache.T @ dy, "bias": dy.sum(axis=0)}
        return dy @ params["weight"].T, grads


class LogSoftmax(Layer):
    def output_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError("log-softmax needs a flat input", dimension="rank")
        return in_shape

    def forward(self, x, params):
        shifted = x - x.max(axis=1, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return out, out

    def backward(self, dy, cache, params):
        return dy - np.exp(cache) * dy.sum(axis=1, keepdims=True), {}


LAYER_TYPES = {
    LayerKind.CONV2D:      Conv2d,
    LayerKind.RELU:        ReLU,
    LayerKind.MAXPOOL2D:   MaxPool2d,
    LayerKind.FLATTEN:     Flatten,
    LayerKind.DENSE:       Dense,
    LayerKind.LOG_SOFTMAX: LogSoftmax,
}


def build_layer(spec):
    try:
        return LAYER_TYPES[spec.kind](spec)
    except KeyError:
        raise UnsupportedLayerError(f"unsupported layer kind {spec.kind!r}", kind=spec.kind) from None
