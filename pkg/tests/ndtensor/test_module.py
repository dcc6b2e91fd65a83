from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from src.ndtensor import Module, Tensor


@dataclass(slots=True, eq=False)
class _Leaf(Module):
    weight: Tensor
    frozen: Tensor


@dataclass(slots=True, eq=False)
class _Tree(Module):
    head: _Leaf
    items: list[_Leaf]
    stats: np.ndarray = field(metadata={"buffer": True})
    scratch: np.ndarray = field(default_factory=lambda: np.zeros(1))


def _leaf(value: float) -> _Leaf:
    return _Leaf(
        weight=Tensor(np.full(2, value), requires_grad=True),
        frozen=Tensor(np.full(2, value)),
    )


def _tree() -> _Tree:
    return _Tree(head=_leaf(1.0), items=[_leaf(2.0), _leaf(3.0)], stats=np.arange(3.0))


def test_named_parameters_walks_fields_and_lists() -> None:
    """验证：参数名按字段与列表下标拼接，顺序稳定。"""
    names = [name for name, _ in _tree().named_parameters()]

    assert names == [
        "head.weight",
        "head.frozen",
        "items.0.weight",
        "items.0.frozen",
        "items.1.weight",
        "items.1.frozen",
    ]


def test_parameters_filters_trainable() -> None:
    """验证：默认只返回 requires_grad 的参数。"""
    tree = _tree()

    assert len(tree.parameters()) == 3
    assert len(tree.parameters(trainable_only=False)) == 6


def test_named_buffers_only_returns_marked_arrays() -> None:
    """验证：只有标记为 buffer 的数组字段会被收集。"""
    buffers = dict(_tree().named_buffers("net."))

    assert list(buffers) == ["net.stats"]


def test_zero_grad_clears_every_parameter() -> None:
    """验证：zero_grad 清空所有参数的梯度。"""
    tree = _tree()
    for tensor in tree.parameters(trainable_only=False):
        tensor.grad = np.ones_like(tensor.data)

    tree.zero_grad()

    assert all(tensor.grad is None for tensor in tree.parameters(trainable_only=False))
