from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..ndtensor import Tensor
from ..utils.errors import DexErrorCode, DexException

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(slots=True)
class AdamW:
    """解耦权重衰减的 Adam；矩估计按参数名保存，便于写入检查点。"""

    params: list[tuple[str, Tensor]]
    weight_decay: float = 0.0
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = ADAM_EPS
    step_count: int = 0
    first_moments: dict[str, np.ndarray] = field(default_factory=dict)
    second_moments: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, tensor in self.params:
            self.first_moments.setdefault(name, np.zeros_like(tensor.data))
            self.second_moments.setdefault(name, np.zeros_like(tensor.data))

    def step(self, lr: float) -> None:
        """对所有带梯度的参数执行一步更新；grad 为 None 的参数本步跳过。"""
        for name, tensor in self.params:
            grad = tensor.grad
            if grad is not None and not np.all(np.isfinite(grad)):
                raise DexException(
                    code=DexErrorCode.NUMERIC_ERROR,
                    message="non-finite gradient reached the optimizer.",
                    detail={"param": name},
                )

        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for name, tensor in self.params:
            grad = tensor.grad
            if grad is None:
                continue
            m = self.first_moments[name]
            v = self.second_moments[name]
            if m.shape != grad.shape:
                raise DexException(
                    code=DexErrorCode.DIMENSION_ERROR,
                    message="gradient shape does not match optimizer state.",
                    detail={"param": name, "grad_shape": grad.shape, "state_shape": m.shape},
                )
            m[...] = self.beta1 * m + (1.0 - self.beta1) * grad
            v[...] = self.beta2 * v + (1.0 - self.beta2) * grad * grad
            data = tensor.data
            if self.weight_decay:
                data *= 1.0 - lr * self.weight_decay
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            data -= (lr * update).astype(data.dtype)

    def zero_grad(self) -> None:
        for _, tensor in self.params:
            tensor.zero_grad()


def global_grad_norm(params: Sequence[Tensor]) -> float:
    total = 0.0
    for tensor in params:
        if tensor.grad is not None:
            total += float(np.sum(tensor.grad.astype(np.float64) ** 2))
    return float(np.sqrt(total))


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """按全局范数原地缩放梯度，返回裁剪前的范数。"""
    norm = global_grad_norm(params)
    if norm > max_norm:
        factor = max_norm / (norm + 1e-12)
        for tensor in params:
            if tensor.grad is not None:
                tensor.grad *= factor
    return norm


def adamw_step(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray | None],
    moments: tuple[list[np.ndarray], list[np.ndarray]],
    step: int,
    lr: float,
    weight_decay: float,
) -> None:
    """无状态形式的单步 AdamW：step 为本次更新后的步数（从 1 开始）。"""
    first, second = moments
    if not len(params) == len(grads) == len(first) == len(second):
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message="params, grads and moments must align.",
            detail={"params": len(params), "grads": len(grads)},
        )
    for position, tensor in enumerate(params):
        tensor.grad = None if grads[position] is None else np.asarray(grads[position])
    optimizer = AdamW(
        params=[(str(position), tensor) for position, tensor in enumerate(params)],
        weight_decay=weight_decay,
        step_count=step - 1,
        first_moments={str(position): item for position, item in enumerate(first)},
        second_moments={str(position): item for position, item in enumerate(second)},
    )
    optimizer.step(lr)
