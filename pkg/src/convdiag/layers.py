"""Network layers with hand-derived forward and backward passes.

Every layer works on a single sample. Convention used throughout:

    conv/pool inputs   [channels, length]
    flatten output     [features]            (1-D)
    dense/head inputs  [features]            (1-D)

There is no padding anywhere: windows that do not fit are dropped, so a
strided convolution over a length-k signal with kernel m and stride d
produces floor((k - m) / d) + 1 outputs, and max pooling over length L
with pool p and stride e produces floor((L - p) / e) + 1.

Backward passes are exact analytic gradients, validated against central
finite differences in the test suite. Layers cache their forward inputs
only when asked (``cache=True``); forward-only inference stays pure so a
frozen model can serve predictions concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, NumericError, ShapeError, StateError

LAYER_KINDS = ("conv1d", "relu", "maxpool", "flatten", "dense", "softmax_head", "sigmoid_head")
HEAD_KINDS = ("softmax_head", "sigmoid_head")


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    """Scaled uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float64)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Probabilities e^z_n / sum_j e^z_j, computed with max-subtraction.

    Shifting by the max changes nothing mathematically (the constant
    cancels) but prevents overflow for large logits.
    """
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("softmax received non-finite logits")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(x):
    """1 / (1 + e^-x), stable on both tails."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass
class LayerSpec:
    """Declarative description of one layer.

    kind-specific fields: conv1d uses num_filters/kernel_size/stride,
    maxpool uses pool_size/stride, dense uses units. Heads carry no
    fields; their width comes from the task (N classes, or 1).
    """

    kind: str
    num_filters: Optional[int] = None
    kernel_size: Optional[int] = None
    stride: Optional[int] = None
    pool_size: Optional[int] = None
    units: Optional[int] = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        required = {
            "conv1d": ("num_filters", "kernel_size", "stride"),
            "maxpool": ("pool_size", "stride"),
            "dense": ("units",),
        }.get(self.kind, ())
        for field in required:
            value = getattr(self, field)
            if value is None or int(value) < 1:
                raise ConfigError(f"{self.kind} layer needs positive {field}, got {value}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for field in ("num_filters", "kernel_size", "stride", "pool_size", "units"):
            value = getattr(self, field)
            if value is not None:
                out[field] = int(value)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "LayerSpec":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ConfigError(f"layer spec must be an object with a 'kind': {obj!r}")
        known = {"kind", "num_filters", "kernel_size", "stride", "pool_size", "units"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown layer spec fields {sorted(unknown)}")
        return cls(**obj)


class Layer:
    """Base class: parameter-free unless params is overridden."""

    spec: LayerSpec

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def output_shape(self, in_shape: tuple) -> tuple:
        raise NotImplementedError

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv1D(Layer):
    """Strided 1-D convolution, summed over input channels, no activation.

    kernels [num_filters, in_channels, m], biases [num_filters]. For
    window i (stride d), output S_i = sum_j input[j + i*d] * K_j + b,
    additionally summed over channels.
    """

    def __init__(self, in_channels: int, num_filters: int, kernel_size: int, stride: int,
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        if stride < 1:
            raise ConfigError(f"conv1d stride must be positive, got {stride}")
        if kernel_size < 1:
            raise ConfigError(f"conv1d kernel_size must be positive, got {kernel_size}")
        self.in_channels = in_channels
        self.num_filters = num_filters
        self.kernel_size = kernel_size
        self.stride = stride
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel_size
        fan_out = num_filters * kernel_size
        self.params = {
            "kernels": glorot_uniform(rng, (num_filters, in_channels, kernel_size), fan_in, fan_out),
            "biases": np.zeros(num_filters, dtype=np.float64),
        }
        self.spec = LayerSpec("conv1d", num_filters=num_filters,
                              kernel_size=kernel_size, stride=stride)
        self._cache = None

    def output_shape(self, in_shape: tuple) -> tuple:
        if len(in_shape) != 2:
            raise ShapeError(f"conv1d needs [channels, length] input, got shape {in_shape}")
        channels, k = in_shape
        if channels != self.in_channels:
            raise ShapeError(f"conv1d built for {self.in_channels} channels, input has {channels}")
        if k < self.kernel_size:
            raise ShapeError(f"input length {k} shorter than kernel {self.kernel_size}")
        out_len = (k - self.kernel_size) // self.stride + 1
        return (self.num_filters, out_len)

    def _windows(self, x: np.ndarray) -> np.ndarray:
        # [channels, out_len, m]; strided view, no copy
        return sliding_window_view(x, self.kernel_size, axis=1)[:, ::self.stride, :]

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        self.output_shape(x.shape)
        windows = self._windows(x)
        out = np.einsum("fcj,cij->fi", self.params["kernels"], windows)
        out += self.params["biases"][:, None]
        if cache:
            self._cache = (x, windows)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("conv1d backward called before a cached forward")
        x, windows = self._cache
        out_len = windows.shape[1]
        if grad_out.shape != (self.num_filters, out_len):
            raise ShapeError(
                f"conv1d grad_out shape {grad_out.shape} != forward output "
                f"{(self.num_filters, out_len)}")
        kernels = self.params["kernels"]
        self.grads = {
            "kernels": np.einsum("fi,cij->fcj", grad_out, windows),
            "biases": grad_out.sum(axis=1),
        }
        # dL/dx: each kernel tap j touches input positions j + i*d, which
        # are distinct for fixed j, so a strided slice accumulates safely.
        grad_in = np.zeros_like(x)
        d = self.stride
        per_tap = np.einsum("fi,fcj->cji", grad_out, kernels)  # [c, m, out_len]
        for j in range(self.kernel_size):
            grad_in[:, j:j + (out_len - 1) * d + 1:d] += per_tap[:, j, :]
        return grad_in


class ReLU(Layer):
    """f(x) = max(0, x). Subgradient at exactly 0 is taken as 0."""

    def __init__(self):
        super().__init__()
        self.spec = LayerSpec("relu")
        self._cache = None

    def output_shape(self, in_shape: tuple) -> tuple:
        return tuple(in_shape)

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        if cache:
            self._cache = x
        return np.maximum(x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("relu backward called before a cached forward")
        if grad_out.shape != self._cache.shape:
            raise ShapeError(f"relu grad_out shape {grad_out.shape} != input {self._cache.shape}")
        return grad_out * (self._cache > 0.0)


class MaxPool1D(Layer):
    """Max pooling per channel: M_i = max over a size-p window at stride e.

    The winning index of each window is cached on the forward pass and
    gradients are routed only there; ties break toward the lowest index.
    Overlapping windows that share a winner accumulate.
    """

    def __init__(self, pool_size: int, stride: int):
        super().__init__()
        if pool_size < 1 or stride < 1:
            raise ConfigError(f"maxpool needs positive pool_size/stride, got {pool_size}/{stride}")
        self.pool_size = pool_size
        self.stride = stride
        self.spec = LayerSpec("maxpool", pool_size=pool_size, stride=stride)
        self._cache = None

    def output_shape(self, in_shape: tuple) -> tuple:
        if len(in_shape) != 2:
            raise ShapeError(f"maxpool needs [channels, length] input, got shape {in_shape}")
        channels, length = in_shape
        if length < self.pool_size:
            raise ShapeError(f"input length {length} shorter than pool size {self.pool_size}")
        return (channels, (length - self.pool_size) // self.stride + 1)

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        channels, pooled_len = self.output_shape(x.shape)
        windows = sliding_window_view(x, self.pool_size, axis=1)[:, ::self.stride, :]
        arg = windows.argmax(axis=2)  # lowest index on ties
        out = np.take_along_axis(windows, arg[:, :, None], axis=2)[:, :, 0]
        if cache:
            winners = arg + np.arange(pooled_len) * self.stride  # [channels, pooled_len]
            self._cache = (x.shape, winners)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("maxpool backward called before a cached forward")
        in_shape, winners = self._cache
        if grad_out.shape != winners.shape:
            raise ShapeError(f"maxpool grad_out shape {grad_out.shape} != output {winners.shape}")
        grad_in = np.zeros(in_shape, dtype=np.float64)
        rows = np.arange(in_shape[0])[:, None]
        np.add.at(grad_in, (rows, winners), grad_out)
        return grad_in


class Flatten(Layer):
    """Shape-only bijection from [channels, length] to 1-D features."""

    def __init__(self):
        super().__init__()
        self.spec = LayerSpec("flatten")
        self._cache = None

    def output_shape(self, in_shape: tuple) -> tuple:
        return (int(np.prod(in_shape)),)

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        if cache:
            self._cache = x.shape
        return x.reshape(-1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("flatten backward called before a cached forward")
        return grad_out.reshape(self._cache)


class Dense(Layer):
    """Affine map W^T x + b with weights [in, out] and biases [out]."""

    def __init__(self, in_features: int, out_features: int,
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {
            "weights": glorot_uniform(rng, (in_features, out_features), in_features, out_features),
            "biases": np.zeros(out_features, dtype=np.float64),
        }
        self.spec = LayerSpec("dense", units=out_features)
        self._cache = None

    def output_shape(self, in_shape: tuple) -> tuple:
        if len(in_shape) != 1:
            raise ShapeError(f"dense needs a 1-D input (flatten first), got shape {in_shape}")
        if in_shape[0] != self.in_features:
            raise ShapeError(f"dense built for {self.in_features} inputs, got {in_shape[0]}")
        return (self.out_features,)

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        self.output_shape(x.shape)
        if cache:
            self._cache = x
        return x @ self.params["weights"] + self.params["biases"]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise StateError("dense backward called before a cached forward")
        if grad_out.shape != (self.out_features,):
            raise ShapeError(f"dense grad_out shape {grad_out.shape} != ({self.out_features},)")
        x = self._cache
        self.grads = {
            "weights": np.outer(x, grad_out),
            "biases": grad_out.copy(),
        }
        return self.params["weights"] @ grad_out


class SoftmaxHead(Layer):
    """Output layer for N-way classification: dense to N logits, softmax.

    backward expects the gradient with respect to the *logits*; the
    cross-entropy loss supplies exactly that, already pushed through the
    softmax Jacobian.
    """

    def __init__(self, in_features: int, n_classes: int,
                 rng: Optional[np.random.Generator] = None):
        if n_classes < 2:
            raise ConfigError(f"softmax head needs >= 2 classes, got {n_classes}")
        self.dense = Dense(in_features, n_classes, rng=rng)
        super().__init__()
        self.n_classes = n_classes
        self.params = self.dense.params
        self.spec = LayerSpec("softmax_head")

    @property
    def grads(self):
        return self.dense.grads

    @grads.setter
    def grads(self, value):
        self.dense.grads = value

    def output_shape(self, in_shape: tuple) -> tuple:
        return self.dense.output_shape(in_shape)

    def forward(self, x: np.ndarray, cache: bool = False) -> np.ndarray:
        return softmax(self.dense.forward(x, cache=cache))

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        return self.dense.backward(grad_logits)


class SigmoidHead(Layer):
    """Output layer for scalar regression: dense to one unit, sigmoid.

    Forward returns a float in (0, 1). backward takes dL/d(estimate) and
    chains the sigmoid derivative y * (1 - y) before the dense backward.
    """

    def __init__(self, in_features: int, rng: Optional[np.random.Generator] = None):
        self.dense = Dense(in_features, 1, rng=rng)
        super().__init__()
        self.params = self.dense.params
        self.spec = LayerSpec("sigmoid_head")
        self._estimate = None

    @property
    def grads(self):
        return self.dense.grads

    @grads.setter
    def grads(self, value):
        self.dense.grads = value

    def output_shape(self, in_shape: tuple) -> tuple:
        self.dense.output_shape(in_shape)
        return ()

    def forward(self, x: np.ndarray, cache: bool = False):
        z = self.dense.forward(x, cache=cache)
        y = float(sigmoid(z[0]))
        if cache:
            self._estimate = y
        return y

    def backward(self, grad_estimate: float) -> np.ndarray:
        if self._estimate is None:
            raise StateError("sigmoid head backward called before a cached forward")
        y = self._estimate
        grad_z = float(grad_estimate) * y * (1.0 - y)
        return self.dense.backward(np.array([grad_z], dtype=np.float64))


def build_layer(spec: LayerSpec, in_shape: tuple, rng: np.random.Generator,
                head_width: Optional[int] = None):
    """Instantiate one layer for a given input shape.

    Returns (layer, out_shape). head_width is the class count for a
    softmax head; sigmoid heads are always width 1.
    """
    if spec.kind == "conv1d":
        if len(in_shape) != 2:
            raise ShapeError(f"conv1d needs [channels, length] input, got shape {in_shape}")
        layer = Conv1D(in_shape[0], spec.num_filters, spec.kernel_size, spec.stride, rng=rng)
    elif spec.kind == "relu":
        layer = ReLU()
    elif spec.kind == "maxpool":
        layer = MaxPool1D(spec.pool_size, spec.stride)
    elif spec.kind == "flatten":
        layer = Flatten()
    elif spec.kind == "dense":
        if len(in_shape) != 1:
            raise ShapeError(f"dense needs a 1-D input (flatten first), got shape {in_shape}")
        layer = Dense(in_shape[0], spec.units, rng=rng)
    elif spec.kind == "softmax_head":
        if len(in_shape) != 1:
            raise ShapeError(f"softmax head needs a 1-D input, got shape {in_shape}")
        if head_width is None:
            raise ConfigError("softmax head requires a class count")
        layer = SoftmaxHead(in_shape[0], head_width, rng=rng)
    elif spec.kind == "sigmoid_head":
        if len(in_shape) != 1:
            raise ShapeError(f"sigmoid head needs a 1-D input, got shape {in_shape}")
        layer = SigmoidHead(in_shape[0], rng=rng)
    else:
        raise ConfigError(f"unknown layer kind {spec.kind!r}")
    return layer, layer.output_shape(in_shape)
