from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from src.synthgen import ModalityMixture
from src.trainengine import METRIC_KEYS, TrainConfig, Trainer, read_metrics, schedules
from src.utils.errors import DexErrorCode, DexException
from tests.utils.builders import tiny_network_config


def _train_config(**overrides: object) -> TrainConfig:
    values: dict[str, object] = {
        "steps": 4,
        "warmup": 0.25,
        "base_lr": 1e-3,
        "batch_size": 4,
        "precision": "float64",
        "log_every": 1,
        "seed": 3,
    }
    values.update(overrides)
    return TrainConfig.model_validate(values)


def _trainer(**overrides: object) -> Trainer:
    return Trainer.create(tiny_network_config(), _train_config(**overrides))


def test_run_writes_one_metrics_line_per_step(tmp_path: Path) -> None:
    """验证：每步写一行指标，键顺序固定，逐层损失长度为 L。"""
    trainer = _trainer()

    history = trainer.run(ModalityMixture(), tmp_path / "metrics.jsonl", tmp_path / "final.ckpt")
    rows = read_metrics(tmp_path / "metrics.jsonl")

    assert len(history) == len(rows) == 4
    assert all(tuple(row) == METRIC_KEYS for row in rows)
    assert [row["step"] for row in rows] == [0, 1, 2, 3]
    assert all(len(row["loss_co_per_layer"]) == 2 for row in rows)
    assert all(np.isfinite(row["loss_total"]) for row in rows)
    assert rows[0]["lr"] == 0.0
    assert (tmp_path / "final.ckpt").is_file()


def test_same_seed_reproduces_metrics_bytes(tmp_path: Path) -> None:
    """验证：同一种子两次训练写出逐字节相同的指标文件。"""
    _trainer().run(ModalityMixture(), tmp_path / "a.jsonl")
    _trainer().run(ModalityMixture(), tmp_path / "b.jsonl")

    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_different_seed_changes_metrics(tmp_path: Path) -> None:
    """验证：换种子后训练轨迹不同。"""
    _trainer(seed=3).run(ModalityMixture(), tmp_path / "a.jsonl")
    _trainer(seed=4).run(ModalityMixture(), tmp_path / "b.jsonl")

    assert (tmp_path / "a.jsonl").read_bytes() != (tmp_path / "b.jsonl").read_bytes()


def test_training_updates_experts_gates_and_director() -> None:
    """验证：训练后专家、π 与 director 均发生变化，c 仍是概率分布。"""
    trainer = _trainer()
    block = trainer.network.blocks[0]
    pi_before = block.gate.pi.data.copy()
    eta_before = block.director.eta.fc1.weight.data.copy()

    for _ in range(3):
        trainer.train_step(trainer.next_batch(ModalityMixture()))

    assert not np.array_equal(block.gate.pi.data, pi_before)
    assert not np.array_equal(block.director.eta.fc1.weight.data, eta_before)
    assert block.gate.c.sum() == pytest.approx(1.0, abs=1e-6)
    assert all(tensor.grad is None for _, tensor in block.director.named_parameters())


def test_director_frozen_when_momentum_is_one() -> None:
    """验证：m_init = m_final = 1 时 director 在训练中逐位不变。"""
    trainer = _trainer(m_init=1.0, m_final=1.0)
    block = trainer.network.blocks[1]
    before = [array.copy() for array in block.director.eta.arrays()]

    for _ in range(2):
        trainer.train_step(trainer.next_batch(ModalityMixture()))

    for old, new in zip(before, block.director.eta.arrays()):
        assert np.array_equal(old, new)


def test_non_finite_loss_aborts_with_numeric_error() -> None:
    """验证：损失出现非有限值时中止训练并报 NUMERIC_ERROR，参数不被更新。"""
    trainer = _trainer()
    trainer.network.decoder.pred.bias.data[0] = np.inf
    weights_before = trainer.network.patch_proj.weight.data.copy()

    with pytest.raises(DexException) as exc_info:
        trainer.train_step(trainer.next_batch(ModalityMixture()))

    assert exc_info.value.code is DexErrorCode.NUMERIC_ERROR
    assert exc_info.value.detail["reason"] == "loss"
    assert trainer.step == 0
    np.testing.assert_array_equal(trainer.network.patch_proj.weight.data, weights_before)


def test_resume_continues_bitwise(tmp_path: Path) -> None:
    """验证：训练 2 步后保存、再从检查点续训 2 步，与连续训练 4 步逐位一致。"""
    straight = _trainer()
    straight.run(ModalityMixture(), tmp_path / "straight.jsonl")

    first = _trainer(steps=4)
    mixture = ModalityMixture()
    for _ in range(2):
        first.train_step(first.next_batch(mixture))
    first.save(tmp_path / "half.ckpt", {})

    resumed = _trainer()
    resumed.resume(tmp_path / "half.ckpt")
    resumed.run(mixture, tmp_path / "resumed.jsonl")

    assert resumed.step == 4
    for (name, left), (_, right) in zip(
        straight.network.named_parameters(), resumed.network.named_parameters()
    ):
        assert np.array_equal(left.data, right.data), name
    assert read_metrics(tmp_path / "resumed.jsonl") == read_metrics(tmp_path / "straight.jsonl")[2:]


def test_float32_training_stays_float32(tmp_path: Path) -> None:
    """验证：32 位训练的参数保持 float32。"""
    trainer = _trainer(precision="float32", steps=2)

    trainer.run(ModalityMixture(), tmp_path / "m.jsonl")

    assert trainer.network.patch_proj.weight.dtype == np.float32
    assert trainer.optimizer.first_moments["patch_proj.weight"].dtype == np.float32


def test_metrics_step_matches_its_schedule_values() -> None:
    """验证：每行指标的 step 即其 lr、m、sigma、lambda_bal 的调度步；训练后 trainer.step 为已完成步数。"""
    trainer = _trainer()
    mixture = ModalityMixture()

    history = [trainer.train_step(trainer.next_batch(mixture)) for _ in range(4)]

    assert trainer.step == 4
    for row in history:
        expected = schedules(row.step, trainer.config)
        assert (row.lr, row.m, row.sigma, row.lambda_bal) == (
            expected.lr,
            expected.m,
            expected.sigma,
            expected.lambda_bal,
        )
    assert [row.step for row in history] == [0, 1, 2, 3]
    assert history[0].lr == 0.0
    assert history[1].lr == pytest.approx(trainer.config.effective_lr)
