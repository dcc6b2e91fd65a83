"""图像级专家激活：全局特征、带频率感知噪声的打分、top-K 选择与频率统计。"""

from __future__ import annotations

import numpy as np

from ..ndtensor import Tensor, ops
from ..utils.errors import DexErrorCode, DexException
from .schema import GateState, RoutingDecision


def global_feature(tokens: Tensor) -> Tensor:
    """[B, N, C] → [B, C]，沿 token 轴取均值。"""
    if tokens.ndim != 3 or tokens.shape[1] < 1:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="global_feature expects tokens of shape [B, N, C] with N >= 1.",
            detail={"shape": tokens.shape},
        )
    return ops.mean(tokens, axis=1)


def frequency_boost(gate: GateState) -> np.ndarray:
    """δ_r = 1 − c_r / (Σ c + ε)：使用越少的专家获得越大的正向偏移。"""
    return 1.0 - gate.c / (gate.c.sum() + gate.epsilon)


def gate_scores(
    feature: Tensor,
    gate: GateState,
    *,
    training: bool,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """s = softmax(f·π + σ·(ε_noise + δ))；评估模式不加噪声。"""
    if gate.pi.shape[0] != feature.shape[-1]:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="gate.pi must have shape (C, R).",
            detail={"pi_shape": gate.pi.shape, "feature_shape": feature.shape},
        )
    logits = ops.matmul(feature, gate.pi)
    if not np.all(np.isfinite(logits.data)):
        raise DexException(
            code=DexErrorCode.NUMERIC_ERROR,
            message="gate logits are not finite.",
            detail={"logits": logits.data},
        )
    if training:
        if rng is None:
            raise ValueError("training-mode gate_scores requires an rng.")
        noise = rng.standard_normal(size=logits.shape)
        perturbation = gate.sigma * (noise + frequency_boost(gate))
        logits = ops.add(logits, Tensor(perturbation.astype(logits.dtype)))
    return ops.softmax(logits, axis=-1)


def token_wise_gate_scores(tokens: Tensor, gate: GateState) -> Tensor:
    """逐 token 打分 [B, N, R]，仅作为计算量对照基线。"""
    return ops.softmax(ops.matmul(tokens, gate.pi), axis=-1)


def select_top_k(
    scores: Tensor,
    top_k: int,
    *,
    pinned_indices: np.ndarray | None = None,
) -> RoutingDecision:
    """每张图选出分数最高的 K 个专家；并列时取编号较小者。

    pinned_indices 给定时跳过选择，但 ω 仍由当前分数重新计算。
    """
    batch, num_experts = scores.shape
    if not 1 <= top_k <= num_experts:
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message="top_k must satisfy 1 <= K <= R.",
            detail={"top_k": top_k, "num_experts": num_experts},
        )
    if pinned_indices is not None:
        topk_indices = np.asarray(pinned_indices, dtype=np.int64)
        if topk_indices.shape != (batch, top_k):
            raise DexException(
                code=DexErrorCode.DIMENSION_ERROR,
                message="pinned routing does not match (B, K).",
                detail={"pinned_shape": topk_indices.shape, "expected": (batch, top_k)},
            )
    else:
        # 稳定排序保证并列分数按专家编号升序
        order = np.argsort(-scores.data, axis=-1, kind="stable")
        topk_indices = order[:, :top_k].astype(np.int64)

    rows = np.arange(batch)[:, None]
    selected = ops.index(scores, (rows, topk_indices))
    weights = ops.normalize_rows(selected, axis=-1)

    indicator = np.zeros((batch, num_experts), dtype=scores.dtype)
    indicator[rows, topk_indices] = 1.0
    return RoutingDecision(
        scores=scores,
        topk_indices=topk_indices,
        weights=weights,
        indicator=indicator,
    )


def batch_activation_distribution(
    routing: RoutingDecision, epsilon: float
) -> np.ndarray:
    """ĉ_r = Σ_b ω_{b,r} / (Σ_{r'} Σ_b ω_{b,r'} + ε)。"""
    mass = routing.dense_weights().sum(axis=0)
    return mass / (mass.sum() + epsilon)


def update_frequency_ema(gate: GateState, routing: RoutingDecision) -> None:
    """c ← μ·c + (1−μ)·ĉ。"""
    c_hat = batch_activation_distribution(routing, gate.epsilon)
    updated = gate.mu * gate.c + (1.0 - gate.mu) * c_hat
    if not np.all(np.isfinite(updated)):
        raise DexException(
            code=DexErrorCode.NUMERIC_ERROR,
            message="activation frequency became non-finite.",
            detail={"c": gate.c, "c_hat": c_hat},
        )
    gate.c[...] = updated
