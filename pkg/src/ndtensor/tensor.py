"""稠密张量与反向模式自动微分的记录带（tape）。"""

from __future__ import annotations

import itertools
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..utils.errors import DexErrorCode, DexException

BackwardRule = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]

# 节点编号单调递增：输入总是先于输出创建，因此按编号排序即为拓扑序
_node_ids = itertools.count()


@dataclass(slots=True, eq=False)
class TapeNode:
    node_id: int
    """输出节点编号"""
    op: str
    """算子名"""
    inputs: tuple[Tensor, ...]
    """参与运算的输入张量"""
    backward_rule: BackwardRule
    """给定输出梯度，返回每个输入的梯度（不需要时为 None）"""

    @property
    def input_ids(self) -> tuple[int | None, ...]:
        return tuple(
            item.tape_node.node_id if item.tape_node is not None else None
            for item in self.inputs
        )


class Tensor:
    """参与梯度记录的稠密多维数组。"""

    __slots__ = ("data", "grad", "requires_grad", "tape_node", "name")

    def __init__(
        self,
        data: Any,
        *,
        requires_grad: bool = False,
        dtype: np.dtype | type | None = None,
        name: str = "",
    ) -> None:
        array = np.asarray(data, dtype=dtype)
        if dtype is None and array.dtype.kind != "f":
            array = array.astype(np.float64)
        # 保留 0 维形状；np.ascontiguousarray 会把标量提升为 (1,)
        self.data: np.ndarray = np.asarray(array, order="C")
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.tape_node: TapeNode | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self.tape_node is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise DexException(
                code=DexErrorCode.DIMENSION_ERROR,
                message="gradient shape does not match tensor shape.",
                detail={"grad_shape": grad.shape, "shape": self.data.shape},
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def backward(self) -> None:
        backward(self)

    def detach(self) -> Tensor:
        from . import ops

        return ops.detach(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # 运算符统一转发到 ops 中记录的算子
    def __add__(self, other: Tensor | float) -> Tensor:
        from . import ops

        return ops.add(self, other)

    def __radd__(self, other: float) -> Tensor:
        from . import ops

        return ops.add(self, other)

    def __sub__(self, other: Tensor | float) -> Tensor:
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other: float) -> Tensor:
        from . import ops

        return ops.add(ops.neg(self), other)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from . import ops

        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, float(other))

    def __rmul__(self, other: float) -> Tensor:
        from . import ops

        return ops.scale(self, float(other))

    def __truediv__(self, other: float) -> Tensor:
        from . import ops

        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported; use normalize_rows.")
        return ops.scale(self, 1.0 / float(other))

    def __neg__(self) -> Tensor:
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        from . import ops

        return ops.matmul(self, other)


@dataclass(slots=True)
class Tape:
    """从标量损失出发、按拓扑序排列的已记录运算。"""

    entries: list[Tensor]

    @classmethod
    def from_loss(cls, loss: Tensor) -> Tape:
        seen: set[int] = set()
        collected: list[Tensor] = []
        stack = [loss]
        while stack:
            current = stack.pop()
            node = current.tape_node
            if node is None or node.node_id in seen:
                continue
            seen.add(node.node_id)
            collected.append(current)
            stack.extend(item for item in node.inputs if item.requires_grad)
        collected.sort(key=lambda item: item.tape_node.node_id)  # type: ignore[union-attr]
        return cls(entries=collected)

    @property
    def node_ids(self) -> list[int]:
        return [item.tape_node.node_id for item in self.entries]  # type: ignore[union-attr]

    def __len__(self) -> int:
        return len(self.entries)


def backward(loss: Tensor) -> Tape:
    """对标量损失做反向传播，梯度在多次使用间累加。"""
    if loss.data.size != 1:
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message="backward requires a scalar loss.",
            detail={"shape": loss.shape},
        )
    seed = np.ones_like(loss.data)
    if not loss.requires_grad:
        return Tape(entries=[])
    if loss.tape_node is None:
        loss.accumulate_grad(seed)
        return Tape(entries=[])

    tape = Tape.from_loss(loss)
    upstream: dict[int, np.ndarray] = {loss.tape_node.node_id: seed}
    for tensor in reversed(tape.entries):
        node = tensor.tape_node
        assert node is not None
        grad = upstream.pop(node.node_id, None)
        if grad is None:
            continue
        tensor.accumulate_grad(grad)
        input_grads = node.backward_rule(grad)
        for item, item_grad in zip(node.inputs, input_grads):
            if item_grad is None or not item.requires_grad:
                continue
            if item.tape_node is None:
                item.accumulate_grad(item_grad)
                continue
            key = item.tape_node.node_id
            if key in upstream:
                upstream[key] = upstream[key] + item_grad
            else:
                upstream[key] = item_grad
    return tape


def next_node_id() -> int:
    return next(_node_ids)
