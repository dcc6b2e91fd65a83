"""带反向规则的张量算子。

广播只支持“尾轴行广播”：第二个操作数的形状等于第一个操作数的尾部维度
（含 0 维标量）。
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from typing import Any

import numpy as np

from ..utils.errors import DexErrorCode, DexException
from .tensor import BackwardRule, TapeNode, Tensor, next_node_id

EPS_NORM = 1e-8
EPS_LAYER_NORM = 1e-12
"""方差稳定项：归一化后每行方差与 1 的偏差 < 1e-6"""
GELU_COEF = 0.044715
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

_strict = False


@contextmanager
def strict_mode(enabled: bool = True) -> Iterator[None]:
    """严格模式：每个算子输出都做有限值检查，余弦遇到零范数直接报错。"""
    global _strict
    previous = _strict
    _strict = enabled
    try:
        yield
    finally:
        _strict = previous


def is_strict() -> bool:
    return _strict


def as_tensor(value: Tensor | float | np.ndarray, like: Tensor | None = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype))


def _record(
    data: np.ndarray,
    op: str,
    inputs: Sequence[Tensor],
    rule: BackwardRule,
) -> Tensor:
    out = Tensor(data)
    if _strict and not np.all(np.isfinite(out.data)):
        raise DexException(
            code=DexErrorCode.NUMERIC_ERROR,
            message=f"non-finite values produced by {op}.",
            detail={"op": op, "shape": out.shape},
        )
    if any(item.requires_grad for item in inputs):
        out.requires_grad = True
        out.tape_node = TapeNode(
            node_id=next_node_id(),
            op=op,
            inputs=tuple(inputs),
            backward_rule=rule,
        )
    return out


def _row_broadcast_shape(
    op: str, a_shape: tuple[int, ...], b_shape: tuple[int, ...]
) -> tuple[int, ...]:
    if a_shape == b_shape:
        return a_shape
    if len(b_shape) <= len(a_shape) and a_shape[len(a_shape) - len(b_shape) :] == b_shape:
        return a_shape
    if len(a_shape) < len(b_shape) and b_shape[len(b_shape) - len(a_shape) :] == a_shape:
        return b_shape
    raise DexException(
        code=DexErrorCode.DIMENSION_ERROR,
        message=f"{op}: operands are not row-broadcast compatible.",
        detail={"a_shape": a_shape, "b_shape": b_shape},
    )


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return grad.reshape((-1, *shape)).sum(axis=0)


def add(a: Tensor | float, b: Tensor | float) -> Tensor:
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    _row_broadcast_shape("add", a.shape, b.shape)

    def rule(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _record(a.data + b.data, "add", (a, b), rule)


def sub(a: Tensor | float, b: Tensor | float) -> Tensor:
    a = as_tensor(a, b if isinstance(b, Tensor) else None)
    b = as_tensor(b, a)
    _row_broadcast_shape("sub", a.shape, b.shape)

    def rule(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(grad, a.shape), -_unbroadcast(grad, b.shape)

    return _record(a.data - b.data, "sub", (a, b), rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _row_broadcast_shape("mul", a.shape, b.shape)

    def rule(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            _unbroadcast(grad * b.data, a.shape),
            _unbroadcast(grad * a.data, b.shape),
        )

    return _record(a.data * b.data, "mul", (a, b), rule)


def scale(x: Tensor, factor: float) -> Tensor:
    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * factor,)

    return _record(x.data * factor, "scale", (x,), rule)


def neg(x: Tensor) -> Tensor:
    return scale(x, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """矩阵乘；支持 [...,M,K]×[K,N] 与同前导维的批量乘。"""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="matmul: inner extents do not agree.",
            detail={"a_shape": a.shape, "b_shape": b.shape},
        )
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="matmul: batched operands must share leading extents.",
            detail={"a_shape": a.shape, "b_shape": b.shape},
        )

    def rule(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_a = grad @ np.swapaxes(b.data, -1, -2)
        if b.ndim == 2:
            flat_a = a.data.reshape(-1, a.shape[-1])
            flat_grad = grad.reshape(-1, grad.shape[-1])
            grad_b = flat_a.T @ flat_grad
        else:
            grad_b = np.swapaxes(a.data, -1, -2) @ grad
        return grad_a, grad_b

    return _record(a.data @ b.data, "matmul", (a, b), rule)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return out


def sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, x.shape).copy(),)

    return _record(
        np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), "sum", (x,), rule
    )


def mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else x.shape[axis]
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if np.isnan(x.data).any():
        raise DexException(
            code=DexErrorCode.NUMERIC_ERROR,
            message="softmax received NaN input.",
            detail={"shape": x.shape},
        )
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=axis, keepdims=True)

    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        inner = (grad * out).sum(axis=axis, keepdims=True)
        return (out * (grad - inner),)

    return _record(out, "softmax", (x,), rule)


def gelu(x: Tensor) -> Tensor:
    """tanh 近似的 GELU。"""
    value = x.data
    inner = _SQRT_2_OVER_PI * (value + GELU_COEF * value**3)
    tanh = np.tanh(inner)
    out = 0.5 * value * (1.0 + tanh)

    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        d_inner = _SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_COEF * value**2)
        local = 0.5 * (1.0 + tanh) + 0.5 * value * (1.0 - tanh**2) * d_inner
        return (grad * local,)

    return _record(out, "gelu", (x,), rule)


def layer_norm(
    x: Tensor,
    gamma: Tensor | None = None,
    beta: Tensor | None = None,
    eps: float = EPS_LAYER_NORM,
) -> Tensor:
    """沿最后一维做层归一化，可选仿射参数。"""
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normalized = centered * inv_std
    out = normalized
    if gamma is not None:
        out = out * gamma.data
    if beta is not None:
        out = out + beta.data

    inputs: list[Tensor] = [x]
    if gamma is not None:
        inputs.append(gamma)
    if beta is not None:
        inputs.append(beta)

    def rule(grad: np.ndarray) -> tuple[np.ndarray, ...]:
        grad_norm = grad * gamma.data if gamma is not None else grad
        grad_x = inv_std * (
            grad_norm
            - grad_norm.mean(axis=-1, keepdims=True)
            - normalized * (grad_norm * normalized).mean(axis=-1, keepdims=True)
        )
        grads: list[np.ndarray] = [grad_x]
        if gamma is not None:
            grads.append(_unbroadcast(grad * normalized, gamma.shape))
        if beta is not None:
            grads.append(_unbroadcast(grad, beta.shape))
        return tuple(grads)

    return _record(out, "layer_norm", inputs, rule)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="mse: operand shapes differ.",
            detail={"pred_shape": pred.shape, "target_shape": target.shape},
        )
    diff = pred.data - target.data
    count = diff.size

    def rule(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_pred = grad * (2.0 / count) * diff
        return grad_pred, -grad_pred

    return _record(np.asarray((diff**2).mean()), "mse", (pred, target), rule)


def cosine_similarity(a: Tensor, b: Tensor, eps: float = EPS_NORM) -> Tensor:
    """沿最后一维的余弦相似度；分母在 eps 处截断。"""
    if a.shape != b.shape:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="cosine_similarity: operand shapes differ.",
            detail={"a_shape": a.shape, "b_shape": b.shape},
        )
    norm_a = np.sqrt((a.data**2).sum(axis=-1, keepdims=True))
    norm_b = np.sqrt((b.data**2).sum(axis=-1, keepdims=True))
    if _strict and (np.any(norm_a <= eps) or np.any(norm_b <= eps)):
        raise DexException(
            code=DexErrorCode.DEGENERATE_INPUT,
            message="cosine_similarity received a zero-norm vector.",
            detail={"min_norm_a": float(norm_a.min()), "min_norm_b": float(norm_b.min())},
        )
    den_a = np.maximum(norm_a, eps)
    den_b = np.maximum(norm_b, eps)
    dot = (a.data * b.data).sum(axis=-1, keepdims=True)
    cos = dot / (den_a * den_b)

    def rule(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g = grad[..., None]
        # 截断生效时分母视为常数，不再含范数的导数项
        self_a = np.where(norm_a > eps, cos * a.data / den_a**2, 0.0)
        self_b = np.where(norm_b > eps, cos * b.data / den_b**2, 0.0)
        grad_a = g * (b.data / (den_a * den_b) - self_a)
        grad_b = g * (a.data / (den_a * den_b) - self_b)
        return grad_a, grad_b

    out = np.clip(cos[..., 0], -1.0, 1.0)
    return _record(out, "cosine_similarity", (a, b), rule)


def detach(x: Tensor) -> Tensor:
    """截断梯度：返回共享数据但不记录历史的新张量。"""
    return Tensor(x.data)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.reshape(x.shape),)

    return _record(x.data.reshape(tuple(shape)), "reshape", (x,), rule)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    inverse = np.argsort(axes)

    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.transpose(inverse),)

    return _record(x.data.transpose(tuple(axes)), "transpose", (x,), rule)


def swapaxes(x: Tensor, axis1: int, axis2: int) -> Tensor:
    axes = list(range(x.ndim))
    axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
    return transpose(x, axes)


def index(x: Tensor, key: Any) -> Tensor:
    """高级索引取值，反向为 scatter-add。"""

    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        grad_x = np.zeros_like(x.data)
        np.add.at(grad_x, key, grad)
        return (grad_x,)

    return _record(np.array(x.data[key]), "index", (x,), rule)


def scatter_add(values: Tensor, key: Any, shape: Sequence[int]) -> Tensor:
    """把 values 按 key 累加进全零张量，反向为按 key 取值。"""
    out = np.zeros(tuple(shape), dtype=values.dtype)
    np.add.at(out, key, values.data)

    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        return (np.array(grad[key]),)

    return _record(out, "scatter_add", (values,), rule)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    sizes = [item.shape[axis] for item in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def rule(grad: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(np.split(grad, offsets, axis=axis))

    return _record(
        np.concatenate([item.data for item in tensors], axis=axis),
        "concat",
        tuple(tensors),
        rule,
    )


def broadcast_rows(x: Tensor, leading: Sequence[int]) -> Tensor:
    """把 x 复制到前导维 leading 上，反向对前导维求和。"""
    shape = (*tuple(leading), *x.shape)

    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        return (_unbroadcast(grad, x.shape),)

    return _record(np.broadcast_to(x.data, shape).copy(), "broadcast_rows", (x,), rule)


def scale_rows(x: Tensor, weights: Tensor) -> Tensor:
    """按第 0 维逐行缩放：out[b] = weights[b] * x[b]。"""
    if weights.ndim != 1 or weights.shape[0] != x.shape[0]:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="scale_rows: weights must be a vector over the leading axis.",
            detail={"x_shape": x.shape, "weights_shape": weights.shape},
        )
    expand = weights.data.reshape((-1,) + (1,) * (x.ndim - 1))

    def rule(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_x = grad * expand
        grad_w = (grad * x.data).reshape(x.shape[0], -1).sum(axis=1)
        return grad_x, grad_w

    return _record(x.data * expand, "scale_rows", (x, weights), rule)


def normalize_rows(x: Tensor, axis: int = -1) -> Tensor:
    """沿 axis 归一化为和为 1：y = x / sum(x)。"""
    total = x.data.sum(axis=axis, keepdims=True)
    out = x.data / total

    def rule(grad: np.ndarray) -> tuple[np.ndarray]:
        inner = (grad * out).sum(axis=axis, keepdims=True)
        return ((grad - inner) / total,)

    return _record(out, "normalize_rows", (x,), rule)
