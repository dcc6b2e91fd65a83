"""专家池前向、director 前向与 GEMA 更新。"""

from __future__ import annotations

import numpy as np

from ..ndtensor import Tensor, ops
from ..ndtensor.layers import FeedForward, Linear
from ..utils.errors import DexErrorCode, DexException
from ..utils.log import logger
from .schema import Director, ExpertPool, RoutingDecision

OMEGA_SUM_TOL = 1e-6


def create_expert_pool(
    rng: np.random.Generator,
    dim: int,
    num_experts: int,
    dtype: np.dtype,
    *,
    mlp_ratio: int = 4,
) -> ExpertPool:
    return ExpertPool(
        experts=[
            FeedForward.create(rng, dim, mlp_ratio * dim, dtype)
            for _ in range(num_experts)
        ]
    )


def _mean_linear(layers: list[Linear]) -> Linear:
    dtype = layers[0].weight.dtype
    weight = np.mean([layer.weight.data for layer in layers], axis=0)
    bias = np.mean([layer.bias.data for layer in layers], axis=0)
    return Linear(
        weight=Tensor(weight.astype(dtype)),
        bias=Tensor(bias.astype(dtype)),
    )


def create_director(pool: ExpertPool, momentum: float) -> Director:
    """director 以专家参数均值初始化，且不接收梯度。"""
    eta = FeedForward(
        fc1=_mean_linear([expert.fc1 for expert in pool.experts]),
        fc2=_mean_linear([expert.fc2 for expert in pool.experts]),
    )
    return Director(eta=eta, momentum=momentum)


def expert_forward(
    tokens: Tensor,
    pool: ExpertPool,
    routing: RoutingDecision,
) -> Tensor:
    """f̂^E_b = Σ_k ω_{b,k} · E_{idx(b,k)}(tokens_b)。

    只有被激活的专家参与计算；梯度经 ω 回流到打分与 π。
    """
    if routing.batch_size != tokens.shape[0]:
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message="routing was computed for a different batch.",
            detail={"routing_batch": routing.batch_size, "tokens_shape": tokens.shape},
        )
    out: Tensor | None = None
    for expert_id, expert in enumerate(pool.experts):
        rows, slots = np.nonzero(routing.topk_indices == expert_id)
        if rows.size == 0:
            continue
        expert_out = expert(ops.index(tokens, rows))
        weight = ops.index(routing.weights, (rows, slots))
        contribution = ops.scatter_add(
            ops.scale_rows(expert_out, weight), rows, tokens.shape
        )
        out = contribution if out is None else ops.add(out, contribution)
    assert out is not None
    return out


def director_forward(tokens: Tensor, director: Director) -> Tensor:
    """director 作用于专家看到的同一输入；输出截断梯度。"""
    return ops.detach(director.eta(ops.detach(tokens)))


def contribution_weights(routing: RoutingDecision) -> np.ndarray:
    """Ω_r = Σ_b ω_{b,r} / Σ_{r'} Σ_b ω_{b,r'}。"""
    mass = routing.dense_weights().sum(axis=0)
    total = mass.sum()
    if total <= 0:
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message="no activated expert in batch.",
            detail={"mass": mass},
        )
    return mass / total


def gema_update(
    pool: ExpertPool,
    director: Director,
    omega: np.ndarray,
    momentum: float,
) -> None:
    """η ← m·η + (1−m)·Σ_r Ω_r·θ_r，逐参数位置更新；专家不变。"""
    if not 0.0 <= momentum <= 1.0:
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message="GEMA momentum must lie in [0, 1].",
            detail={"momentum": momentum},
        )
    if omega.shape != (len(pool),) or abs(float(omega.sum()) - 1.0) > OMEGA_SUM_TOL:
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message="contribution weights must be a length-R vector summing to 1.",
            detail={"omega": omega, "num_experts": len(pool)},
        )
    eta_arrays = director.eta.arrays()
    expert_arrays = [expert.arrays() for expert in pool.experts]
    for expert_id, arrays in enumerate(expert_arrays):
        shapes = [item.shape for item in arrays]
        expected = [item.shape for item in eta_arrays]
        if shapes != expected:
            raise DexException(
                code=DexErrorCode.CONTRACT_ERROR,
                message="expert and director parameter shapes differ.",
                detail={"expert": expert_id, "expert_shapes": shapes, "director_shapes": expected},
            )

    director.momentum = momentum
    if momentum == 1.0:
        return
    for position, target in enumerate(eta_arrays):
        aggregate = np.zeros_like(target)
        for expert_id, arrays in enumerate(expert_arrays):
            if omega[expert_id] == 0.0:
                continue
            aggregate += omega[expert_id] * arrays[position]
        target[...] = momentum * target + (1.0 - momentum) * aggregate

    logger.debug(
        "gema.update",
        {"momentum": momentum, "omega": omega},
    )
