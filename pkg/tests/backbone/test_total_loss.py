from __future__ import annotations

import pytest
from src.backbone import LossWeights, layer_factors, total_loss
from src.utils.errors import DexErrorCode, DexException


def test_layer_factors_grow_with_depth() -> None:
    """验证：α^l = 1/(L−l+1)，最后一层为 1。"""
    assert layer_factors(3) == pytest.approx((1 / 3, 1 / 2, 1.0))
    assert layer_factors(1) == (1.0,)
    with pytest.raises(ValueError):
        layer_factors(0)


def test_total_loss_combines_terms() -> None:
    """验证：总损失按层因子与 λ 组合三项。"""
    weights = LossWeights.for_depth(2, lambda_co=0.1, lambda_bal=0.01)

    loss = total_loss(0.5, [0.4, 0.2], [2.0, 3.0], weights)

    expected = 0.5 + (0.1 / 2) * (0.5 * 0.4 + 1.0 * 0.2) + (0.01 / 2) * (2.0 + 3.0)
    assert loss.item() == pytest.approx(expected)


def test_zero_weights_reduce_to_reconstruction() -> None:
    """验证：λ 均为 0 时总损失等于重建损失。"""
    weights = LossWeights.for_depth(2, lambda_co=0.0, lambda_bal=0.0)

    assert total_loss(0.7, [1.0, 1.0], [4.0, 4.0], weights).item() == pytest.approx(0.7)


def test_total_loss_requires_one_entry_per_layer() -> None:
    """验证：逐层损失数量与层数不符时报 CONTRACT_ERROR。"""
    weights = LossWeights.for_depth(3, lambda_co=0.1, lambda_bal=0.01)

    with pytest.raises(DexException) as exc_info:
        total_loss(0.5, [0.1, 0.2], [1.0, 1.0], weights)

    assert exc_info.value.code is DexErrorCode.CONTRACT_ERROR
