from __future__ import annotations

import numpy as np
import pytest
from src.dexblock import alignment_loss, balance_loss, select_top_k
from src.ndtensor import Tensor, backward
from src.utils.errors import DexErrorCode, DexException


def test_alignment_is_zero_for_parallel_and_two_for_opposite() -> None:
    """验证：方向相同的特征对齐损失为 0，方向相反为 2。"""
    features = np.random.default_rng(0).standard_normal((2, 3, 4))

    same = alignment_loss(Tensor(features), Tensor(2.0 * features)).item()
    opposite = alignment_loss(Tensor(features), Tensor(-features)).item()

    assert same == pytest.approx(0.0, abs=1e-12)
    assert opposite == pytest.approx(2.0)


def test_alignment_rejects_shape_mismatch() -> None:
    """验证：两组特征形状不同时报 DIMENSION_ERROR。"""
    with pytest.raises(DexException) as exc_info:
        alignment_loss(Tensor(np.ones((1, 2, 3))), Tensor(np.ones((1, 3, 3))))

    assert exc_info.value.code is DexErrorCode.DIMENSION_ERROR


def test_balance_uniform_scores_give_k() -> None:
    """验证：打分均匀时均衡损失等于 K。"""
    routing = select_top_k(Tensor(np.full((6, 4), 0.25)), 2)

    assert balance_loss(routing).item() == pytest.approx(2.0)


def test_balance_collapsed_routing_gives_r() -> None:
    """验证：所有图片都把全部分数给同一专家时均衡损失等于 R。"""
    scores = np.zeros((5, 4))
    scores[:, 2] = 1.0

    routing = select_top_k(Tensor(scores), 1)

    assert balance_loss(routing).item() == pytest.approx(4.0)


def test_balance_gradient_flows_only_through_scores() -> None:
    """验证：均衡损失的梯度为 R·mean(I)/B，指示矩阵视为常数。"""
    scores = Tensor(np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]]), requires_grad=True)
    routing = select_top_k(scores, 1)

    backward(balance_loss(routing))

    expected_row = 3 * np.array([0.5, 0.0, 0.5]) / 2
    np.testing.assert_allclose(scores.grad, np.stack([expected_row, expected_row]))


def test_alignment_of_rowwise_orthogonal_features_is_one() -> None:
    """验证：每个 token 上两组特征正交时对齐损失为 1。"""
    expert = np.zeros((2, 3, 4))
    director = np.zeros((2, 3, 4))
    expert[..., 0] = np.arange(1.0, 7.0).reshape(2, 3)
    director[..., 1] = -np.arange(2.0, 8.0).reshape(2, 3)

    assert alignment_loss(Tensor(expert), Tensor(director)).item() == pytest.approx(1.0, abs=1e-12)


def test_balance_collapse_exceeds_uniform_for_random_sizes() -> None:
    """验证：随机 R ≤ 16、K < R 时，全部坍缩到同一专家的均衡损失 R 大于均匀打分的 K。"""
    rng = np.random.default_rng(0)
    for _ in range(20):
        num_experts = int(rng.integers(2, 17))
        top_k = int(rng.integers(1, num_experts))
        batch = int(rng.integers(1, 9))
        collapsed = np.zeros((batch, num_experts))
        collapsed[:, 0] = 1.0

        uniform_value = balance_loss(
            select_top_k(Tensor(np.full((batch, num_experts), 1.0 / num_experts)), top_k)
        ).item()
        collapse_value = balance_loss(select_top_k(Tensor(collapsed), top_k)).item()

        assert uniform_value == pytest.approx(top_k)
        assert collapse_value == pytest.approx(num_experts)
        assert collapse_value > uniform_value


def test_balance_single_expert_is_one() -> None:
    """验证：R = K = 1 时均衡损失恒为 1。"""
    assert balance_loss(select_top_k(Tensor(np.ones((3, 1))), 1)).item() == pytest.approx(1.0)
