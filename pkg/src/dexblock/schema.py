from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..ndtensor import Module, Tensor
from ..ndtensor.layers import FeedForward
from ..utils.errors import DexErrorCode, DexException

FREQUENCY_EPS = 1e-8
"""频率归一化与 δ 计算中的稳定项 ε"""


@dataclass(slots=True, eq=False)
class GateState(Module):
    pi: Tensor
    """激活矩阵 [C, R]，可训练"""
    c: np.ndarray = field(metadata={"buffer": True})
    """长期激活频率 [R]，不参与梯度"""
    top_k: int = 2
    """每张图激活的专家数 K"""
    sigma: float = 1.0
    """当前噪声标准差，由训练调度写入"""
    mu: float = 0.99
    """频率 EMA 动量"""
    epsilon: float = FREQUENCY_EPS

    def __post_init__(self) -> None:
        if not 1 <= self.top_k <= self.num_experts:
            raise DexException(
                code=DexErrorCode.CONFIG_ERROR,
                message="top_k must satisfy 1 <= K <= R.",
                detail={"top_k": self.top_k, "num_experts": self.num_experts},
            )
        if self.sigma < 0:
            raise DexException(
                code=DexErrorCode.CONFIG_ERROR,
                message="sigma must be >= 0.",
                detail={"sigma": self.sigma},
            )

    @property
    def num_experts(self) -> int:
        return self.pi.shape[1]


@dataclass(slots=True, eq=False)
class ExpertPool(Module):
    experts: list[FeedForward]
    """θ_1..θ_R，形状一致"""

    def __len__(self) -> int:
        return len(self.experts)


@dataclass(slots=True, eq=False)
class Director(Module):
    eta: FeedForward
    """与单个专家同形的前馈块，只由 GEMA 写入"""
    momentum: float = 0.99
    """最近一次 GEMA 使用的动量 m"""


@dataclass(slots=True)
class RoutingDecision:
    scores: Tensor
    """s [B, R]，训练模式下包含噪声"""
    topk_indices: np.ndarray
    """[B, K]，按分数降序"""
    weights: Tensor
    """ω [B, K]，每行和为 1"""
    indicator: np.ndarray
    """I [B, R]，0/1"""

    @property
    def batch_size(self) -> int:
        return int(self.topk_indices.shape[0])

    @property
    def num_experts(self) -> int:
        return int(self.indicator.shape[1])

    def dense_weights(self) -> np.ndarray:
        """把 ω 展开为 [B, R]，未选中的专家为 0。"""
        dense = np.zeros(self.indicator.shape, dtype=self.weights.dtype)
        rows = np.arange(self.batch_size)[:, None]
        dense[rows, self.topk_indices] = self.weights.data
        return dense
