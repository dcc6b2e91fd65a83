from __future__ import annotations

from ..ndtensor import Tensor, ops
from ..utils.errors import DexErrorCode, DexException
from .schema import RoutingDecision


def alignment_loss(expert_features: Tensor, director_features: Tensor) -> Tensor:
    """逐 token 余弦距离 1 − cos 的均值，取值 [0, 2]。"""
    if expert_features.shape != director_features.shape:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="alignment_loss operands must share shape.",
            detail={
                "expert_shape": expert_features.shape,
                "director_shape": director_features.shape,
            },
        )
    cos = ops.cosine_similarity(expert_features, director_features)
    return 1.0 - ops.mean(cos)


def balance_loss(routing: RoutingDecision) -> Tensor:
    """R · Σ_r mean_b(s_{b,r}) · mean_b(I_{b,r})；I 为常数。"""
    num_experts = routing.num_experts
    soft = ops.mean(routing.scores, axis=0)
    hard = Tensor(routing.indicator.mean(axis=0).astype(soft.dtype))
    return ops.scale(ops.sum(ops.mul(soft, hard)), float(num_experts))
