from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from src.analysis import collect_probe_features, linear_probe, probe_report
from src.synthgen import ModalityMixture, generate, images_to_array, labels_of
from src.utils.errors import DexErrorCode, DexException
from tests.utils.builders import tiny_network


def _blobs(n_per_class: int = 50, separation: float = 6.0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(0)
    centers = np.eye(3, 5) * separation
    features = np.concatenate([center + rng.standard_normal((n_per_class, 5)) for center in centers])
    labels = np.repeat(np.arange(3), n_per_class)
    return features, labels


def test_probe_separates_linearly_separable_classes() -> None:
    """验证：线性可分的高斯团上探针准确率接近 1，训练 / 留出划分为 70 / 30。"""
    features, labels = _blobs()

    result = linear_probe(features, labels)

    assert result.accuracy >= 0.97
    assert result.num_classes == 3
    assert (result.train_size, result.test_size) == (105, 45)


def test_probe_on_random_labels_is_near_chance() -> None:
    """验证：标签与特征无关时准确率接近 1/S。"""
    rng = np.random.default_rng(1)
    features = rng.standard_normal((600, 4))
    labels = rng.integers(0, 4, size=600)

    result = linear_probe(features, labels)

    assert abs(result.accuracy - 0.25) < 0.1


def test_probe_is_deterministic_for_a_seed() -> None:
    """验证：同一种子划分与结果可复现。"""
    features, labels = _blobs(separation=1.0)

    assert linear_probe(features, labels, seed=3) == linear_probe(features, labels, seed=3)


def test_singular_system_escalates_regularization() -> None:
    """验证：特征恒为 0 且不加正则时，正则系数被放大后求解成功。"""
    features = np.zeros((40, 3))
    labels = np.repeat([0, 1], 20)

    result = linear_probe(features, labels, l2_reg=0.0)

    assert result.l2_reg == pytest.approx(1e-8)


@pytest.mark.parametrize(
    ("features", "labels", "code"),
    [
        (np.zeros((30, 2)), np.zeros(30, dtype=int), DexErrorCode.CONTRACT_ERROR),
        (np.zeros((30, 2)), np.array([0] * 25 + [1] * 5), DexErrorCode.CONTRACT_ERROR),
        (np.zeros((30, 2)), np.zeros(29, dtype=int), DexErrorCode.DIMENSION_ERROR),
    ],
)
def test_probe_validates_inputs(features: np.ndarray, labels: np.ndarray, code: DexErrorCode) -> None:
    """验证：类别不足、单类样本过少或形状不符时报错。"""
    with pytest.raises(DexException) as exc_info:
        linear_probe(features, labels)

    assert exc_info.value.code is code


def test_raw_pixels_reveal_modality() -> None:
    """验证：原始像素上的模态探针远高于随机水平。"""
    samples = generate(ModalityMixture(seed=5), 1600)
    pixels = images_to_array(samples).reshape(1600, -1)
    modality, _ = labels_of(samples)

    result = linear_probe(pixels, modality, l2_reg=100.0)

    assert result.accuracy > 0.9


def test_collect_features_and_report(tmp_path: Path) -> None:
    """验证：收集的特征为 [n, C]，报告包含语义与模态两个探针及随机水平。"""
    network = tiny_network()

    dataset = collect_probe_features(network, ModalityMixture(), 200, batch_size=64)
    payload = probe_report(network, ModalityMixture(), tmp_path, n_samples=200)

    assert dataset.features.shape == (200, 16)
    assert dataset.pixels.shape == (200, 1024)
    assert dataset.modality_ids.shape == dataset.semantic_ids.shape == (200,)
    saved = json.loads((tmp_path / "probe.json").read_text(encoding="utf-8"))
    assert set(saved) == {"n_samples", "semantic", "semantic_chance", "modality", "modality_chance"}
    assert saved["semantic_chance"] == 0.25
    assert 0.0 <= payload["semantic"]["accuracy"] <= 1.0
