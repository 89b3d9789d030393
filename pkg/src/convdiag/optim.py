"""Parameter update rules: plain SGD and Adam with bias correction.

Both operate in place on a name -> array mapping so layer objects keep
their parameter references. Optimizer state serializes losslessly into
checkpoints, which is what makes resumed training bit-identical to an
uninterrupted run.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .tensor import from_jsonable, to_jsonable


def _check_pair(name: str, param: np.ndarray, grad: np.ndarray) -> None:
    if param.shape != grad.shape:
        raise ShapeError(f"gradient shape {grad.shape} != parameter shape "
                         f"{param.shape} for '{name}'")
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient for '{name}'")


class SGD:
    """theta <- theta - lr * g."""

    kind = "sgd"

    def __init__(self, learning_rate: float = 1e-3):
        if learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {learning_rate}")
        self.learning_rate = learning_rate

    def step(self, params: dict, grads: dict) -> None:
        for name, param in params.items():
            grad = grads[name]
            _check_pair(name, param, grad)
            param -= self.learning_rate * grad

    def state_dict(self) -> dict:
        return {"kind": self.kind, "learning_rate": self.learning_rate}

    def load_state_dict(self, state: dict) -> None:
        self.learning_rate = float(state["learning_rate"])


class Adam:
    """Adam with bias-corrected first/second moments.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

    Moment tensors are allocated lazily per parameter name on the first
    step; the step counter t advances exactly once per step() call.
    """

    kind = "adam"

    def __init__(self, learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {learning_rate}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        if eps <= 0:
            raise ConfigError(f"eps must be positive, got {eps}")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, param in params.items():
            grad = grads[name]
            _check_pair(name, param, grad)
            if name not in self.m:
                self.m[name] = np.zeros_like(param)
                self.v[name] = np.zeros_like(param)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            m_hat = m / correction1
            v_hat = v / correction2
            param -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "t": self.t,
            "m": {name: to_jsonable(arr) for name, arr in self.m.items()},
            "v": {name: to_jsonable(arr) for name, arr in self.v.items()},
        }

    def load_state_dict(self, state: dict) -> None:
        self.learning_rate = float(state["learning_rate"])
        self.beta1 = float(state["beta1"])
        self.beta2 = float(state["beta2"])
        self.eps = float(state["eps"])
        self.t = int(state["t"])
        self.m = {name: from_jsonable(obj) for name, obj in state["m"].items()}
        self.v = {name: from_jsonable(obj) for name, obj in state["v"].items()}


def make_optimizer(kind: str, learning_rate: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8):
    if kind == "sgd":
        return SGD(learning_rate)
    if kind == "adam":
        return Adam(learning_rate, beta1, beta2, eps)
    raise ConfigError(f"unknown optimizer kind {kind!r}")


def optimizer_from_state(state: dict):
    opt = make_optimizer(state.get("kind", ""), learning_rate=float(state["learning_rate"]))
    opt.load_state_dict(state)
    return opt
