from __future__ import annotations

import numpy as np
import pytest
from src.dexblock import apply_block_updates, dex_block_forward
from src.ndtensor import Tensor, backward, ops
from tests.utils.builders import tiny_block


def _tokens(batch: int = 4) -> Tensor:
    return Tensor(np.random.default_rng(7).standard_normal((batch, 6, 8)))


def test_block_forward_shapes_and_routing() -> None:
    """验证：输出形状与输入一致，每张图恰好激活 K 个专家，损失为标量。"""
    block = tiny_block()

    out = dex_block_forward(_tokens(), block, training=True, rng=np.random.default_rng(0))

    assert out.tokens.shape == (4, 6, 8)
    assert out.routing.topk_indices.shape == (4, 2)
    np.testing.assert_array_equal(out.routing.indicator.sum(axis=1), [2, 2, 2, 2])
    assert out.alignment.data.shape == ()
    assert 0.0 <= out.alignment.item() <= 2.0
    assert 0.0 < out.balance.item() <= 4.0 + 1e-9


def test_eval_forward_is_deterministic() -> None:
    """验证：评估模式不加噪声，两次前向输出一致。"""
    block = tiny_block()

    first = dex_block_forward(_tokens(), block, training=False)
    second = dex_block_forward(_tokens(), block, training=False)

    np.testing.assert_array_equal(first.tokens.data, second.tokens.data)
    np.testing.assert_array_equal(first.routing.topk_indices, second.routing.topk_indices)


def test_top_k_override_changes_active_experts() -> None:
    """验证：推理时可以覆盖 K。"""
    block = tiny_block()

    out = dex_block_forward(_tokens(), block, training=False, top_k=3)

    assert out.routing.topk_indices.shape == (4, 3)


def test_backward_reaches_gate_but_not_director() -> None:
    """验证：总损失反向后 π 有梯度，director 参数始终没有梯度。"""
    block = tiny_block()
    out = dex_block_forward(_tokens(), block, training=True, rng=np.random.default_rng(1))
    loss = ops.add(ops.add(ops.mean(ops.mul(out.tokens, out.tokens)), out.alignment), out.balance)

    backward(loss)

    assert block.gate.pi.grad is not None and np.any(block.gate.pi.grad != 0)
    assert block.attn.qkv.weight.grad is not None
    assert all(tensor.grad is None for _, tensor in block.director.named_parameters())


def test_apply_block_updates_moves_director_and_frequency() -> None:
    """验证：块更新返回和为 1 的 Ω，并更新 director 与激活频率。"""
    block = tiny_block()
    out = dex_block_forward(_tokens(), block, training=True, rng=np.random.default_rng(2))
    eta_before = block.director.eta.fc1.weight.data.copy()
    c_before = block.gate.c.copy()

    omega = apply_block_updates(block, out.routing, 0.9)

    assert omega.sum() == pytest.approx(1.0)
    assert not np.array_equal(block.director.eta.fc1.weight.data, eta_before)
    assert not np.array_equal(block.gate.c, c_before)
    assert block.gate.c.sum() == pytest.approx(1.0, abs=1e-6)


def test_block_buffers_are_persisted_by_name() -> None:
    """验证：激活频率 c 作为缓冲区暴露，director 参数出现在参数列表但不可训练。"""
    block = tiny_block()

    buffers = dict(block.named_buffers())
    names = [name for name, _ in block.named_parameters()]
    trainable = {id(tensor) for tensor in block.parameters()}

    assert list(buffers) == ["gate.c"]
    assert "director.eta.fc1.weight" in names
    assert id(block.director.eta.fc1.weight) not in trainable


def test_director_target_replaces_director_forward() -> None:
    """验证：给定 director_target 时以其为对齐目标；传入上次的 director 输出则结果不变，且扰动 director 参数不再影响对齐损失。"""
    block = tiny_block()
    live = dex_block_forward(_tokens(), block, training=False)

    pinned = dex_block_forward(
        _tokens(), block, training=False, director_target=live.director_features
    )
    assert pinned.alignment.item() == live.alignment.item()
    np.testing.assert_array_equal(pinned.director_features, live.director_features)

    for array in block.director.eta.arrays():
        array += 0.5
    frozen = dex_block_forward(
        _tokens(), block, training=False, director_target=live.director_features
    )
    moved = dex_block_forward(_tokens(), block, training=False)

    assert frozen.alignment.item() == live.alignment.item()
    assert moved.alignment.item() != live.alignment.item()
