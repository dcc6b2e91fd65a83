from __future__ import annotations

import numpy as np
import pytest
from src.dexblock import (
    GateState,
    gate_scores,
    global_feature,
    select_top_k,
    token_wise_gate_scores,
    update_frequency_ema,
)
from src.dexblock.gate import frequency_boost
from src.ndtensor import Tensor
from src.utils.errors import DexErrorCode, DexException


def _gate(dim: int = 4, num_experts: int = 4, *, sigma: float = 1.0) -> GateState:
    pi = np.random.default_rng(0).standard_normal((dim, num_experts)) * 0.1
    return GateState(
        pi=Tensor(pi, requires_grad=True),
        c=np.full(num_experts, 1.0 / num_experts),
        top_k=2,
        sigma=sigma,
    )


def test_global_feature_is_token_mean() -> None:
    """验证：全局特征等于沿 token 轴的均值。"""
    tokens = np.random.default_rng(1).standard_normal((2, 5, 3))

    np.testing.assert_allclose(global_feature(Tensor(tokens)).data, tokens.mean(axis=1))


def test_global_feature_rejects_bad_rank() -> None:
    """验证：输入不是 [B, N, C] 时报 DIMENSION_ERROR。"""
    with pytest.raises(DexException) as exc_info:
        global_feature(Tensor(np.zeros((2, 3))))

    assert exc_info.value.code is DexErrorCode.DIMENSION_ERROR


def test_scores_are_probability_rows_and_eval_is_deterministic() -> None:
    """验证：打分每行和为 1；评估模式下重复调用结果一致且不需要 rng。"""
    gate = _gate()
    feature = Tensor(np.random.default_rng(2).standard_normal((3, 4)))

    first = gate_scores(feature, gate, training=False).data
    second = gate_scores(feature, gate, training=False).data

    np.testing.assert_allclose(first.sum(axis=1), np.ones(3))
    np.testing.assert_array_equal(first, second)


def test_training_scores_require_rng_and_depend_on_noise() -> None:
    """验证：训练模式必须提供 rng，且噪声使结果偏离评估打分。"""
    gate = _gate()
    feature = Tensor(np.random.default_rng(3).standard_normal((3, 4)))

    with pytest.raises(ValueError):
        gate_scores(feature, gate, training=True)
    noisy = gate_scores(feature, gate, training=True, rng=np.random.default_rng(0)).data
    clean = gate_scores(feature, gate, training=False).data
    assert not np.allclose(noisy, clean)


def test_zero_sigma_training_matches_eval() -> None:
    """验证：σ=0 时训练与评估打分相同。"""
    gate = _gate(sigma=0.0)
    feature = Tensor(np.random.default_rng(4).standard_normal((2, 4)))

    noisy = gate_scores(feature, gate, training=True, rng=np.random.default_rng(9)).data

    np.testing.assert_allclose(noisy, gate_scores(feature, gate, training=False).data)


def test_frequency_boost_favours_rarely_used_experts() -> None:
    """验证：激活频率越低的专家获得越大的 δ。"""
    gate = _gate()
    gate.c[...] = [0.7, 0.2, 0.1, 0.0]

    boost = frequency_boost(gate)

    assert np.all(np.diff(boost) > 0)
    assert boost[-1] == pytest.approx(1.0)


def test_top_k_ties_break_towards_lower_index() -> None:
    """验证：分数全部相同时选中编号最小的 K 个专家。"""
    scores = Tensor(np.full((2, 4), 0.25))

    routing = select_top_k(scores, 2)

    np.testing.assert_array_equal(routing.topk_indices, [[0, 1], [0, 1]])
    np.testing.assert_allclose(routing.weights.data, 0.5)


def test_top_k_weights_and_indicator() -> None:
    """验证：ω 由选中分数归一化得到，指示矩阵每行恰有 K 个 1。"""
    scores = Tensor(np.array([[0.1, 0.6, 0.1, 0.2], [0.4, 0.1, 0.3, 0.2]]))

    routing = select_top_k(scores, 2)

    np.testing.assert_array_equal(routing.topk_indices, [[1, 3], [0, 2]])
    np.testing.assert_allclose(routing.weights.data, [[0.75, 0.25], [4 / 7, 3 / 7]])
    np.testing.assert_array_equal(routing.indicator.sum(axis=1), [2, 2])
    dense = routing.dense_weights()
    assert dense[0, 1] == pytest.approx(0.75)
    assert dense[0, 0] == 0.0


def test_top_k_validates_k_and_pinned_shape() -> None:
    """验证：K 越界报 CONTRACT_ERROR，固定路由形状不符报 DIMENSION_ERROR。"""
    scores = Tensor(np.full((2, 4), 0.25))

    with pytest.raises(DexException) as k_error:
        select_top_k(scores, 5)
    with pytest.raises(DexException) as pin_error:
        select_top_k(scores, 2, pinned_indices=np.zeros((2, 3), dtype=np.int64))

    assert k_error.value.code is DexErrorCode.CONTRACT_ERROR
    assert pin_error.value.code is DexErrorCode.DIMENSION_ERROR


def test_pinned_routing_recomputes_weights_from_scores() -> None:
    """验证：固定路由保留给定下标，ω 仍按当前分数重新计算。"""
    scores = Tensor(np.array([[0.1, 0.2, 0.3, 0.4]]))

    routing = select_top_k(scores, 2, pinned_indices=np.array([[0, 1]]))

    np.testing.assert_array_equal(routing.topk_indices, [[0, 1]])
    np.testing.assert_allclose(routing.weights.data, [[1 / 3, 2 / 3]])


def test_gate_state_rejects_invalid_top_k() -> None:
    """验证：构造门控时 K 越界报 CONFIG_ERROR。"""
    with pytest.raises(DexException) as exc_info:
        GateState(pi=Tensor(np.zeros((4, 2))), c=np.full(2, 0.5), top_k=3)

    assert exc_info.value.code is DexErrorCode.CONFIG_ERROR


def test_frequency_ema_moves_towards_batch_distribution() -> None:
    """验证：频率 EMA 为 μ·c + (1−μ)·ĉ，且保持和为 1。"""
    gate = _gate()
    gate.mu = 0.5
    routing = select_top_k(Tensor(np.array([[0.1, 0.6, 0.1, 0.2]])), 2)

    update_frequency_ema(gate, routing)

    expected = 0.5 * np.full(4, 0.25) + 0.5 * np.array([0.0, 0.75, 0.0, 0.25])
    np.testing.assert_allclose(gate.c, expected, atol=1e-7)
    assert gate.c.sum() == pytest.approx(1.0, abs=1e-7)


def test_token_wise_scores_shape() -> None:
    """验证：逐 token 打分输出 [B, N, R]。"""
    gate = _gate()

    scores = token_wise_gate_scores(Tensor(np.ones((2, 5, 4))), gate)

    assert scores.shape == (2, 5, 4)
