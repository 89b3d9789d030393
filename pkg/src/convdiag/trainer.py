"""Model assembly, the training loop, evaluation, and persistence.

Training: repeat { draw a seeded mini-batch, forward, loss, backward,
optimizer step } until max_iterations. Mini-batches sample without
replacement within an epoch; each epoch's permutation is derived
statelessly from (seed, epoch), so a run resumed from a checkpoint at
iteration k replays exactly the batches an uninterrupted run would see.

Checkpoints are single JSON documents carrying the architecture, every
parameter tensor at full precision, optimizer state, label map and
standardization stats; load(save(model)) reproduces forward outputs
bit-identically.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .data import ChannelStats, LabelMap, Sample, SplitDataset, apply_stats
from .errors import (CheckpointError, ConfigError, DataError, DivergenceError,
                     NumericError, ShapeError)
from .layers import HEAD_KINDS, LayerSpec, build_layer
from .losses import cross_entropy_loss, least_squares_loss
from .metrics import (ClassificationReport, classification_metrics,
                      regression_metrics)
from .optim import make_optimizer, optimizer_from_state
from .tensor import from_jsonable, to_jsonable

CHECKPOINT_VERSION = "1"

LOSS_KINDS = ("cross_entropy", "least_squares")
_LOSS_FOR_HEAD = {"softmax_head": "cross_entropy", "sigmoid_head": "least_squares"}


@dataclass
class ModelConfig:
    """Ordered layer specs; exactly one head, and it must come last."""

    layers: list
    classes: Optional[list] = None  # pins label order (class 0 = positive)

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("model config needs at least one layer")
        self.layers = [spec if isinstance(spec, LayerSpec) else LayerSpec.from_dict(spec)
                       for spec in self.layers]
        heads = [i for i, spec in enumerate(self.layers) if spec.kind in HEAD_KINDS]
        if len(heads) != 1 or heads[0] != len(self.layers) - 1:
            raise ConfigError("model must contain exactly one head layer, "
                              "placed last")

    @property
    def head_kind(self) -> str:
        return self.layers[-1].kind

    def to_dict(self) -> dict:
        out = {"layers": [spec.to_dict() for spec in self.layers]}
        if self.classes is not None:
            out["classes"] = list(self.classes)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        if not isinstance(obj, dict) or "layers" not in obj:
            raise ConfigError("model section must contain a 'layers' list")
        unknown = set(obj) - {"layers", "classes"}
        if unknown:
            raise ConfigError(f"unknown model config fields {sorted(unknown)}")
        return cls(layers=list(obj["layers"]), classes=obj.get("classes"))


@dataclass
class TrainConfig:
    loss: str
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    max_iterations: int = 1000
    seed: int = 0
    eval_every: int = 50

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"unknown loss {self.loss!r}; expected one of {LOSS_KINDS}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be positive, got {self.batch_size}")
        if self.max_iterations < 0:
            raise ConfigError(f"max iterations must be >= 0, got {self.max_iterations}")

    def to_dict(self) -> dict:
        return {
            "loss": self.loss, "optimizer": self.optimizer,
            "learning_rate": self.learning_rate, "beta1": self.beta1,
            "beta2": self.beta2, "eps": self.eps, "batch_size": self.batch_size,
            "max_iterations": self.max_iterations, "seed": self.seed,
            "eval_every": self.eval_every,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown training config fields {sorted(unknown)}")
        if "loss" not in obj:
            raise ConfigError("training config needs a 'loss' field")
        return cls(**obj)


class Model:
    """A shape-checked stack of layers ending in a head, together with
    the label map and standardization stats it was trained with."""

    def __init__(self, config: ModelConfig, layers: list, input_shape: tuple,
                 label_map: Optional[LabelMap] = None,
                 stats: Optional[ChannelStats] = None):
        self.config = config
        self.layers = layers
        self.input_shape = tuple(int(d) for d in input_shape)
        self.label_map = label_map
        self.stats = stats

    @property
    def head(self):
        return self.layers[-1]

    @property
    def head_kind(self) -> str:
        return self.config.head_kind

    @property
    def task(self) -> str:
        return "classification" if self.head_kind == "softmax_head" else "regression"

    def forward(self, x: np.ndarray, cache: bool = False, return_features: bool = False):
        """Run one window through the stack.

        Returns the head output (probability vector or scalar estimate);
        with return_features also the penultimate activation feeding the
        head.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.input_shape:
            raise ShapeError(f"input shape {x.shape} != model input {self.input_shape}")
        for layer in self.layers[:-1]:
            x = layer.forward(x, cache=cache)
        out = self.head.forward(x, cache=cache)
        return (out, x) if return_features else out

    def penultimate(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x, return_features=True)[1]

    def backward(self, grad_head) -> np.ndarray:
        """Propagate the loss gradient back through every layer; each
        parametric layer stores its parameter gradients."""
        grad = self.head.backward(grad_head)
        for layer in reversed(self.layers[:-1]):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, value in layer.params.items():
                out[f"layer{i}.{key}"] = value
        return out

    def gradients(self) -> dict:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, value in layer.grads.items():
                out[f"layer{i}.{key}"] = value
        return out


def build_model(config: ModelConfig, input_shape: tuple,
                label_map: Optional[LabelMap] = None,
                stats: Optional[ChannelStats] = None, seed: int = 0) -> Model:
    """Instantiate and shape-check a model against a probe input shape.

    The classification head is sized to the label map; a regression head
    is always width 1.
    """
    if len(input_shape) != 2 or min(input_shape) < 1:
        raise ConfigError(f"input shape must be (channels, window_len), got {input_shape}")
    head_width = None
    if config.head_kind == "softmax_head":
        if label_map is None:
            raise ConfigError("a classification model needs a label map to size its head")
        head_width = len(label_map)
        if head_width < 2:
            raise ConfigError(f"classification needs >= 2 classes, got {head_width}")
    rng = np.random.default_rng(seed)
    layers = []
    shape = tuple(int(d) for d in input_shape)
    prev = "input"
    for i, spec in enumerate(config.layers):
        try:
            layer, shape_out = build_layer(spec, shape, rng, head_width=head_width)
        except ShapeError as exc:
            raise ConfigError(f"layer {i} ({spec.kind}) cannot consume the shape "
                              f"{shape} produced by {prev}: {exc}") from exc
        layers.append(layer)
        shape = shape_out
        prev = f"layer {i} ({spec.kind})"
    return Model(config, layers, input_shape, label_map=label_map, stats=stats)


@dataclass
class LogEntry:
    iteration: int
    train_loss: float
    val_metric: Optional[float] = None


@dataclass
class TrainingLog:
    entries: list = field(default_factory=list)

    def append(self, iteration: int, train_loss: float,
               val_metric: Optional[float] = None) -> None:
        self.entries.append(LogEntry(iteration, train_loss, val_metric))

    def to_csv(self, path) -> None:
        lines = ["iteration,train_loss,val_metric"]
        for e in self.entries:
            val = "" if e.val_metric is None else repr(e.val_metric)
            lines.append(f"{e.iteration},{e.train_loss!r},{val}")
        Path(path).write_text("\n".join(lines) + "\n")


def batch_indices(seed: int, n: int, batch_size: int, iteration: int) -> np.ndarray:
    """Mini-batch for one iteration: within an epoch samples are drawn
    without replacement from a permutation seeded by (seed, epoch)."""
    batch_size = min(batch_size, n)
    per_epoch = math.ceil(n / batch_size)
    epoch, slot = divmod(iteration, per_epoch)
    perm = np.random.default_rng([seed, epoch]).permutation(n)
    return perm[slot * batch_size:(slot + 1) * batch_size]


def _check_loss_head(model: Model, cfg: TrainConfig) -> None:
    expected = _LOSS_FOR_HEAD[model.head_kind]
    if cfg.loss != expected:
        raise ConfigError(f"{model.head_kind} pairs with {expected!r} loss, "
                          f"config says {cfg.loss!r}")


def _validation_metric(model: Model, samples: list) -> float:
    report = evaluate(model, samples)
    if isinstance(report, ClassificationReport):
        return report.accuracy
    return report.rmse


def train(model: Model, dataset: SplitDataset, cfg: TrainConfig,
          optimizer=None, start_iteration: int = 0,
          log: Optional[TrainingLog] = None) -> TrainingLog:
    """Mini-batch training to cfg.max_iterations (the only stopping
    rule). Mutates the model in place and returns the training log.

    Pass the optimizer/start_iteration from a loaded checkpoint to
    resume; the result is bit-identical to a run that never stopped.
    """
    _check_loss_head(model, cfg)
    if not dataset.train:
        raise DataError("training split is empty")
    shapes = {s.window.shape for s in dataset.train}
    if shapes != {model.input_shape}:
        raise DataError(f"sample shapes {sorted(shapes)} do not all match model "
                        f"input {model.input_shape}")
    if optimizer is None:
        optimizer = make_optimizer(cfg.optimizer, learning_rate=cfg.learning_rate,
                                   beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    log = log if log is not None else TrainingLog()
    params = model.parameters()
    n = len(dataset.train)

    for iteration in range(start_iteration, cfg.max_iterations):
        idx = batch_indices(cfg.seed, n, cfg.batch_size, iteration)
        q = len(idx)
        accum = {name: np.zeros_like(p) for name, p in params.items()}
        batch_loss = 0.0
        try:
            for i in idx:
                sample = dataset.train[int(i)]
                out = model.forward(sample.window, cache=True)
                if model.task == "classification":
                    loss_i, grad_logits = cross_entropy_loss(out[None, :], [sample.target])
                    model.backward(grad_logits[0] / q)
                else:
                    loss_i, grad_est = least_squares_loss([out], [sample.target])
                    model.backward(grad_est[0] / q)
                batch_loss += loss_i / q
                for name, grad in model.gradients().items():
                    accum[name] += grad
            if not np.isfinite(batch_loss):
                raise NumericError("non-finite training loss")
            optimizer.step(params, accum)
        except DivergenceError:
            raise
        except NumericError as exc:
            raise DivergenceError(f"{exc} at iteration {iteration}",
                                  iteration=iteration) from exc
        val_metric = None
        if (cfg.eval_every and dataset.validation
                and (iteration + 1) % cfg.eval_every == 0):
            val_metric = _validation_metric(model, dataset.validation)
        log.append(iteration, batch_loss, val_metric)
    return log


def evaluate(model: Model, samples: list):
    """Forward-only scoring: a ClassificationReport (argmax predictions,
    full confusion matrix) or a RegressionReport."""
    if not samples:
        raise DataError("evaluation needs at least one sample")
    if model.task == "classification":
        n_classes = len(model.label_map) if model.label_map else model.head.n_classes
        labels = [int(s.target) for s in samples]
        predictions = [int(np.argmax(model.forward(s.window))) for s in samples]
        return classification_metrics(predictions, labels, positive_class=0,
                                      n_classes=n_classes)
    estimates = [model.forward(s.window) for s in samples]
    targets = [float(s.target) for s in samples]
    return regression_metrics(estimates, targets)


@dataclass
class Prediction:
    task: str
    elapsed_ms: float
    label_index: Optional[int] = None
    label: Optional[str] = None
    probabilities: Optional[list] = None
    confidence: Optional[float] = None
    estimate: Optional[float] = None

    def decision_record(self) -> dict:
        """Machine-readable record for the downstream decision log."""
        record = {"timestamp": datetime.now(timezone.utc).isoformat(),
                  "task": self.task, "elapsed_ms": self.elapsed_ms}
        if self.task == "classification":
            record.update(predicted=self.label if self.label is not None else self.label_index,
                          confidence=self.confidence)
        else:
            record.update(estimate=self.estimate)
        return record


def predict(model: Model, window: np.ndarray, standardized: bool = False) -> Prediction:
    """Single-window inference with wall-clock timing.

    Raw windows are standardized with the model's stored stats unless
    the caller says they already are.
    """
    window = np.atleast_2d(np.asarray(window, dtype=np.float64))
    if window.shape != model.input_shape:
        raise DataError(f"window shape {window.shape} does not match the trained "
                        f"input shape {model.input_shape}")
    if model.stats is not None and not standardized:
        window = apply_stats([Sample(window=window, target=0)], model.stats)[0].window
    start = time.perf_counter()
    out = model.forward(window)
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    if model.task == "classification":
        index = int(np.argmax(out))
        label = model.label_map.name(index) if model.label_map else None
        return Prediction(task="classification", elapsed_ms=elapsed_ms,
                          label_index=index, label=label,
                          probabilities=out.tolist(), confidence=float(out[index]))
    return Prediction(task="regression", elapsed_ms=elapsed_ms, estimate=float(out))


@dataclass
class FeatureExport:
    feature_names: list
    rows: list        # dicts: sample_id, label, prediction, pc1, pc2, f*
    components: list  # the 1-2 principal axes used for (pc1, pc2)

    def to_csv(self, path) -> None:
        header = ["sample_id", "label", "prediction", "pc1", "pc2"] + self.feature_names
        lines = [",".join(header)]
        for row in self.rows:
            lines.append(",".join(str(row[k]) for k in header))
        Path(path).write_text("\n".join(lines) + "\n")


def export_features(model: Model, samples: list) -> FeatureExport:
    """Per-sample penultimate activations plus their 2-component PCA
    projection (centered; components orthonormal)."""
    if len(samples) < 2:
        raise DataError(f"projection needs >= 2 samples, got {len(samples)}")
    outputs, features = [], []
    for s in samples:
        out, feats = model.forward(s.window, return_features=True)
        outputs.append(out)
        features.append(feats)
    matrix = np.stack(features)  # [q, D]
    centered = matrix - matrix.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2]
    projected = centered @ components.T
    if projected.shape[1] < 2:  # single-feature penultimate layer
        projected = np.hstack([projected, np.zeros((len(samples), 1))])
    feature_names = [f"f{j}" for j in range(matrix.shape[1])]
    rows = []
    for i, s in enumerate(samples):
        if model.task == "classification":
            prediction = int(np.argmax(outputs[i]))
        else:
            prediction = float(outputs[i])
        row = {"sample_id": i, "label": s.target, "prediction": prediction,
               "pc1": float(projected[i, 0]), "pc2": float(projected[i, 1])}
        row.update({name: float(matrix[i, j]) for j, name in enumerate(feature_names)})
        rows.append(row)
    return FeatureExport(feature_names=feature_names, rows=rows,
                         components=[c.tolist() for c in components])


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    model: Model
    optimizer: Optional[object]
    iteration: int
    run_config: Optional[dict]


def save_checkpoint(path, model: Model, optimizer=None, iteration: int = 0,
                    run_config: Optional[dict] = None) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "iteration": int(iteration),
        "task": model.task,
        "input_shape": list(model.input_shape),
        "model": model.config.to_dict(),
        "label_map": model.label_map.to_dict() if model.label_map else None,
        "stats": model.stats.to_dict() if model.stats else None,
        "parameters": {name: to_jsonable(arr) for name, arr in model.parameters().items()},
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "run_config": run_config,
    }
    path = Path(path)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc.msg} at byte "
                              f"offset {exc.pos}") from exc
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint format {version!r} is incompatible with "
                              f"this build (expected {CHECKPOINT_VERSION!r})")
    try:
        config = ModelConfig.from_dict(doc["model"])
        label_map = LabelMap.from_dict(doc["label_map"]) if doc.get("label_map") else None
        stats = ChannelStats.from_dict(doc["stats"]) if doc.get("stats") else None
        input_shape = tuple(int(d) for d in doc["input_shape"])
        model = build_model(config, input_shape, label_map=label_map, stats=stats, seed=0)
        params = model.parameters()
        stored = doc["parameters"]
        if set(stored) != set(params):
            raise ConfigError(f"checkpoint parameters {sorted(stored)} do not match "
                              f"the architecture's {sorted(params)}")
        for name, param in params.items():
            value = from_jsonable(stored[name])
            if value.shape != param.shape:
                raise ConfigError(f"checkpoint tensor {name!r} has shape "
                                  f"{value.shape}, model expects {param.shape}")
            param[...] = value
        optimizer = (optimizer_from_state(doc["optimizer"])
                     if doc.get("optimizer") else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc!r}") from exc
    return Checkpoint(model=model, optimizer=optimizer,
                      iteration=int(doc.get("iteration", 0)),
                      run_config=doc.get("run_config"))
