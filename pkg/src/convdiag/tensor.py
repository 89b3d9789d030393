"""Dense tensor primitives used everywhere else in the package.

A tensor here is simply a C-contiguous (row-major) ``numpy.ndarray`` of
float64. 64-bit precision is deliberate: the package's correctness story
rests on finite-difference gradient checks, which are unreliable in
float32. There is no broadcasting anywhere; every operation demands
explicit shape agreement so backward-pass shapes stay auditable.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from .errors import NumericError, ShapeError

Tensor = np.ndarray

_ELEMENTWISE_OPS = {"add": np.add, "sub": np.subtract, "mul": np.multiply}
_REDUCE_OPS = ("sum", "max", "argmax", "mean")


def tensor(values, require_finite: bool = True) -> Tensor:
    """Build a float64 row-major tensor from nested lists or an array."""
    t = np.ascontiguousarray(values, dtype=np.float64)
    if require_finite and not np.all(np.isfinite(t)):
        raise NumericError("tensor contains non-finite values")
    return t


def _check_shape(shape: Sequence[int]) -> tuple:
    dims = tuple(int(d) for d in shape)
    if len(dims) == 0:
        raise ShapeError("empty shape is not a valid tensor shape")
    if any(d < 1 for d in dims):
        raise ShapeError(f"all dimensions must be >= 1, got {dims}")
    return dims


def zeros(shape: Sequence[int]) -> Tensor:
    """All-zero tensor of the given shape."""
    return np.zeros(_check_shape(shape), dtype=np.float64)


def zeros_like(t: Tensor) -> Tensor:
    return np.zeros_like(t, dtype=np.float64)


def elementwise(op: str, a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add/sub/mul of two tensors of identical shape."""
    if op not in _ELEMENTWISE_OPS:
        raise ShapeError(f"unknown elementwise op {op!r}")
    if a.shape != b.shape:
        raise ShapeError(f"elementwise {op}: shapes {a.shape} and {b.shape} differ")
    return _ELEMENTWISE_OPS[op](a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a 2-D [r, s] tensor with a 2-D [s, t] tensor."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree, {a.shape} x {b.shape}")
    return a @ b


def reduce(op: str, a: Tensor, axis: Optional[int] = None) -> Union[Tensor, float, int]:
    """Reduce a tensor with sum/max/mean/argmax.

    Without an axis the whole tensor collapses to a Python scalar. argmax
    ties break toward the lowest flat index.
    """
    if op not in _REDUCE_OPS:
        raise ShapeError(f"unknown reduce op {op!r}")
    if axis is not None and not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"axis {axis} out of range for rank-{a.ndim} tensor")
    fn = getattr(np, op)
    out = fn(a, axis=axis)
    if axis is None:
        return int(out) if op == "argmax" else float(out)
    return out


def reshape(t: Tensor, shape: Sequence[int]) -> Tensor:
    """View the same row-major data under a new shape."""
    dims = _check_shape(shape)
    if int(np.prod(dims)) != t.size:
        raise ShapeError(f"cannot reshape {t.size} values into {dims}")
    return t.reshape(dims)


def to_jsonable(t: Tensor) -> dict:
    """Serialize as {shape, data} with full decimal round-trip precision.

    json writes each float with repr, which parses back to the identical
    bit pattern, so checkpoints reproduce tensors exactly.
    """
    return {"shape": list(t.shape), "data": t.ravel(order="C").tolist()}


def from_jsonable(obj: dict) -> Tensor:
    try:
        shape = _check_shape(obj["shape"])
        data = np.asarray(obj["data"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ShapeError(f"malformed serialized tensor: {exc}") from exc
    if data.ndim != 1 or data.size != int(np.prod(shape)):
        raise ShapeError(
            f"serialized tensor data length {data.size} does not match shape {shape}"
        )
    return np.ascontiguousarray(data.reshape(shape))
