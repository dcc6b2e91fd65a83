from __future__ import annotations

from collections.abc import Iterator
from dataclasses import fields, is_dataclass

import numpy as np

from .tensor import Tensor


class Module:
    """参数容器基类：子类为 dataclass，字段中的 Tensor / Module / Module 列表会被递归收集。

    数组字段只有在 `field(metadata={"buffer": True})` 标记时才视为需要持久化的缓冲区。
    """

    __slots__ = ()

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in self._named_children(prefix):
            if isinstance(value, Tensor):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        if not is_dataclass(self):
            return
        for item in fields(self):
            value = getattr(self, item.name)
            if item.metadata.get("buffer") and isinstance(value, np.ndarray):
                yield f"{prefix}{item.name}", value
        for name, value in self._named_children(prefix):
            if isinstance(value, Module):
                yield from value.named_buffers(f"{name}.")

    def parameters(self, *, trainable_only: bool = True) -> list[Tensor]:
        return [
            tensor
            for _, tensor in self.named_parameters()
            if tensor.requires_grad or not trainable_only
        ]

    def zero_grad(self) -> None:
        for _, tensor in self.named_parameters():
            tensor.zero_grad()

    def _named_children(self, prefix: str) -> Iterator[tuple[str, Tensor | Module]]:
        if not is_dataclass(self):
            return
        for item in fields(self):
            value = getattr(self, item.name)
            name = f"{prefix}{item.name}"
            if isinstance(value, (Tensor, Module)):
                yield name, value
            elif isinstance(value, list):
                for position, child in enumerate(value):
                    if isinstance(child, (Tensor, Module)):
                        yield f"{name}.{position}", child
