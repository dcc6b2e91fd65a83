from __future__ import annotations

from collections.abc import Sequence

from ..ndtensor import Tensor, ops
from ..utils.errors import DexErrorCode, DexException
from .schema import LossWeights


def total_loss(
    loss_self: Tensor | float,
    alignment: Sequence[Tensor | float],
    balance: Sequence[Tensor | float],
    weights: LossWeights,
) -> Tensor:
    """L = (λ_co/L)·Σ α^l·L_co^l + (λ_bal/L)·Σ L_bal^l + L_self。"""
    depth = len(weights.alphas)
    if len(alignment) != depth or len(balance) != depth:
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message="per-layer loss lists must have one entry per DEX layer.",
            detail={
                "depth": depth,
                "alignment": len(alignment),
                "balance": len(balance),
            },
        )
    out = ops.as_tensor(loss_self)
    for alpha, co, bal in zip(weights.alphas, alignment, balance):
        out = ops.add(out, ops.scale(ops.as_tensor(co, out), weights.lambda_co * alpha / depth))
        out = ops.add(out, ops.scale(ops.as_tensor(bal, out), weights.lambda_bal / depth))
    return out
