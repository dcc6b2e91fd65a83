from __future__ import annotations

import numpy as np

from .tensor import Tensor

PRECISIONS: dict[str, type[np.floating]] = {
    "float64": np.float64,
    "float32": np.float32,
}


def resolve_dtype(precision: str) -> np.dtype:
    """把配置中的精度名映射为 numpy dtype。"""
    normalized = precision.strip().lower()
    if normalized not in PRECISIONS:
        raise ValueError(f"Unsupported precision: {precision}")
    return np.dtype(PRECISIONS[normalized])


def xavier_uniform(
    rng: np.random.Generator,
    fan_in: int,
    fan_out: int,
    dtype: np.dtype,
    *,
    requires_grad: bool = True,
) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    data = rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)
    return Tensor(data, requires_grad=requires_grad)


def normal(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    std: float,
    dtype: np.dtype,
    *,
    requires_grad: bool = True,
) -> Tensor:
    data = (rng.standard_normal(size=shape) * std).astype(dtype)
    return Tensor(data, requires_grad=requires_grad)


def zeros(
    shape: tuple[int, ...],
    dtype: np.dtype,
    *,
    requires_grad: bool = True,
) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(
    shape: tuple[int, ...],
    dtype: np.dtype,
    *,
    requires_grad: bool = True,
) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)
