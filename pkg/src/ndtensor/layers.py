"""网络基础层：线性、层归一化、前馈、多头自注意力。"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..utils.errors import DexErrorCode, DexException
from . import ops
from .init import ones, xavier_uniform, zeros
from .module import Module
from .tensor import Tensor


@dataclass(slots=True, eq=False)
class Linear(Module):
    weight: Tensor
    """[in, out]"""
    bias: Tensor
    """[out]"""

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        fan_in: int,
        fan_out: int,
        dtype: np.dtype,
        *,
        requires_grad: bool = True,
    ) -> Linear:
        return cls(
            weight=xavier_uniform(rng, fan_in, fan_out, dtype, requires_grad=requires_grad),
            bias=zeros((fan_out,), dtype, requires_grad=requires_grad),
        )

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


@dataclass(slots=True, eq=False)
class LayerNorm(Module):
    gamma: Tensor
    beta: Tensor
    eps: float = ops.EPS_LAYER_NORM

    @classmethod
    def create(cls, dim: int, dtype: np.dtype) -> LayerNorm:
        return cls(gamma=ones((dim,), dtype), beta=zeros((dim,), dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, eps=self.eps)


@dataclass(slots=True, eq=False)
class FeedForward(Module):
    """两层前馈 C → hidden → C，中间 GELU。专家与 director 共用此结构。"""

    fc1: Linear
    fc2: Linear

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        dim: int,
        hidden: int,
        dtype: np.dtype,
        *,
        requires_grad: bool = True,
    ) -> FeedForward:
        return cls(
            fc1=Linear.create(rng, dim, hidden, dtype, requires_grad=requires_grad),
            fc2=Linear.create(rng, hidden, dim, dtype, requires_grad=requires_grad),
        )

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(ops.gelu(self.fc1(x)))

    def arrays(self) -> list[np.ndarray]:
        """按固定顺序返回全部参数数组（GEMA 逐位置更新使用）。"""
        return [tensor.data for _, tensor in self.named_parameters()]


@dataclass(slots=True, eq=False)
class MultiHeadAttention(Module):
    qkv: Linear
    proj: Linear
    heads: int

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        dim: int,
        heads: int,
        dtype: np.dtype,
    ) -> MultiHeadAttention:
        if dim % heads != 0:
            raise DexException(
                code=DexErrorCode.CONFIG_ERROR,
                message="attention dim must be divisible by heads.",
                detail={"dim": dim, "heads": heads},
            )
        return cls(
            qkv=Linear.create(rng, dim, 3 * dim, dtype),
            proj=Linear.create(rng, dim, dim, dtype),
            heads=heads,
        )

    def __call__(self, x: Tensor) -> Tensor:
        batch, tokens, dim = x.shape
        head_dim = dim // self.heads
        qkv = ops.reshape(self.qkv(x), (batch, tokens, 3, self.heads, head_dim))
        # [3, B, H, N, d]
        qkv = ops.transpose(qkv, (2, 0, 3, 1, 4))
        q = ops.index(qkv, 0)
        k = ops.index(qkv, 1)
        v = ops.index(qkv, 2)

        scores = ops.scale(ops.matmul(q, ops.swapaxes(k, -1, -2)), 1.0 / math.sqrt(head_dim))
        attn = ops.softmax(scores, axis=-1)
        out = ops.matmul(attn, v)
        out = ops.reshape(ops.transpose(out, (0, 2, 1, 3)), (batch, tokens, dim))
        return self.proj(out)


@dataclass(slots=True, eq=False)
class TransformerBlock(Module):
    """普通 pre-norm Transformer 层（解码器使用）。"""

    norm1: LayerNorm
    attn: MultiHeadAttention
    norm2: LayerNorm
    mlp: FeedForward

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        dim: int,
        heads: int,
        mlp_ratio: int,
        dtype: np.dtype,
    ) -> TransformerBlock:
        return cls(
            norm1=LayerNorm.create(dim, dtype),
            attn=MultiHeadAttention.create(rng, dim, heads, dtype),
            norm2=LayerNorm.create(dim, dtype),
            mlp=FeedForward.create(rng, dim, mlp_ratio * dim, dtype),
        )

    def __call__(self, x: Tensor) -> Tensor:
        x = ops.add(x, self.attn(self.norm1(x)))
        return ops.add(x, self.mlp(self.norm2(x)))
