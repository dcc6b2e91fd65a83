"""DEX 模块：自注意力 + 图像级门控专家池 + director。"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ndtensor import Module, Tensor, ops
from ..ndtensor.layers import LayerNorm, MultiHeadAttention
from .experts import (
    contribution_weights,
    create_director,
    create_expert_pool,
    director_forward,
    expert_forward,
    gema_update,
)
from .gate import gate_scores, global_feature, select_top_k, update_frequency_ema
from .losses import alignment_loss, balance_loss
from .schema import Director, ExpertPool, GateState, RoutingDecision


@dataclass(slots=True, eq=False)
class DexBlock(Module):
    norm1: LayerNorm
    attn: MultiHeadAttention
    norm2: LayerNorm
    gate: GateState
    pool: ExpertPool
    director: Director

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        *,
        dim: int,
        heads: int,
        num_experts: int,
        top_k: int,
        dtype: np.dtype,
        mlp_ratio: int = 4,
        sigma: float = 1.0,
        mu: float = 0.99,
        momentum: float = 0.99,
        gate_init_std: float = 0.02,
    ) -> DexBlock:
        pool = create_expert_pool(rng, dim, num_experts, dtype, mlp_ratio=mlp_ratio)
        gate = GateState(
            pi=Tensor(
                (rng.standard_normal((dim, num_experts)) * gate_init_std).astype(dtype),
                requires_grad=True,
            ),
            c=np.full(num_experts, 1.0 / num_experts, dtype=np.float64),
            top_k=top_k,
            sigma=sigma,
            mu=mu,
        )
        return cls(
            norm1=LayerNorm.create(dim, dtype),
            attn=MultiHeadAttention.create(rng, dim, heads, dtype),
            norm2=LayerNorm.create(dim, dtype),
            gate=gate,
            pool=pool,
            director=create_director(pool, momentum),
        )


@dataclass(slots=True)
class BlockOutput:
    tokens: Tensor
    """残差相加后的输出 [B, N, C]"""
    routing: RoutingDecision
    alignment: Tensor
    """标量对齐损失"""
    balance: Tensor
    """标量均衡损失"""
    director_features: np.ndarray
    """本次前向的 director 输出（已截断梯度）"""


def dex_block_forward(
    tokens: Tensor,
    block: DexBlock,
    *,
    training: bool,
    rng: np.random.Generator | None = None,
    pinned_indices: np.ndarray | None = None,
    top_k: int | None = None,
    director_target: np.ndarray | None = None,
) -> BlockOutput:
    """x ← x + attn(LN(x))；h ← LN(x)；按 h 的全局特征路由；输出 x + f̂^E。

    对齐与均衡损失在残差相加之前、直接基于 f̂^E 计算。
    director_target 给定时以该常量代替 director 前向（梯度校验冻结对齐目标）。
    """
    x = ops.add(tokens, block.attn(block.norm1(tokens)))
    h = block.norm2(x)

    scores = gate_scores(global_feature(h), block.gate, training=training, rng=rng)
    active_k = top_k if top_k is not None else block.gate.top_k
    routing = select_top_k(scores, active_k, pinned_indices=pinned_indices)

    expert_features = expert_forward(h, block.pool, routing)
    if director_target is not None:
        director_features = Tensor(director_target)
    else:
        director_features = director_forward(h, block.director)

    return BlockOutput(
        tokens=ops.add(x, expert_features),
        routing=routing,
        alignment=alignment_loss(expert_features, director_features),
        balance=balance_loss(routing),
        director_features=director_features.data,
    )


def apply_block_updates(
    block: DexBlock,
    routing: RoutingDecision,
    momentum: float,
) -> np.ndarray:
    """优化器步之后的非梯度更新：GEMA 与激活频率 EMA。返回本步 Ω。"""
    omega = contribution_weights(routing)
    gema_update(block.pool, block.director, omega, momentum)
    update_frequency_ema(block.gate, routing)
    return omega
