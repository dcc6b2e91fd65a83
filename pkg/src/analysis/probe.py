from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..backbone import DexNetwork
from ..synthgen import ModalityMixture, images_to_array, labels_of, sample_batch
from ..utils.errors import DexErrorCode, DexException
from ..utils.log import logger

MIN_PER_CLASS = 10
TRAIN_FRACTION = 0.7
MAX_REG_RETRIES = 12


@dataclass(slots=True)
class ProbeResult:
    accuracy: float
    num_classes: int
    train_size: int
    test_size: int
    l2_reg: float
    """实际使用的正则系数（奇异时会被放大）"""

    def to_dict(self) -> dict[str, float | int]:
        return {
            "accuracy": self.accuracy,
            "num_classes": self.num_classes,
            "train_size": self.train_size,
            "test_size": self.test_size,
            "l2_reg": self.l2_reg,
        }


def _solve_ridge(design: np.ndarray, targets: np.ndarray, l2_reg: float) -> tuple[np.ndarray, float]:
    gram = design.T @ design
    rhs = design.T @ targets
    reg = l2_reg
    for _ in range(MAX_REG_RETRIES):
        try:
            return np.linalg.solve(gram + reg * np.eye(gram.shape[0]), rhs), reg
        except np.linalg.LinAlgError:
            next_reg = reg * 10.0 if reg > 0 else 1e-8
            logger.warning(
                "probe.singular_system",
                {"l2_reg": reg, "next_l2_reg": next_reg},
            )
            reg = next_reg
    raise DexException(
        code=DexErrorCode.NUMERIC_ERROR,
        message="ridge system stayed singular after increasing l2_reg.",
        detail={"l2_reg": reg},
    )


def linear_probe(
    features: np.ndarray,
    labels: np.ndarray,
    l2_reg: float = 1e-3,
    *,
    seed: int = 0,
    train_fraction: float = TRAIN_FRACTION,
) -> ProbeResult:
    """闭式岭回归一对多分类器；按固定种子划分训练 / 留出集，返回留出集准确率。"""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="features must be [n, d] with one label per row.",
            detail={"features_shape": features.shape, "labels_shape": labels.shape},
        )
    classes, encoded = np.unique(labels, return_inverse=True)
    counts = np.bincount(encoded, minlength=len(classes))
    if len(classes) < 2 or counts.min() < MIN_PER_CLASS:
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message=f"linear_probe needs >= 2 classes with >= {MIN_PER_CLASS} samples each.",
            detail={"class_counts": counts.tolist()},
        )

    order = np.random.default_rng(seed).permutation(features.shape[0])
    split = int(round(train_fraction * features.shape[0]))
    train_idx, test_idx = order[:split], order[split:]

    mean = features[train_idx].mean(axis=0)
    std = features[train_idx].std(axis=0)
    std[std == 0.0] = 1.0
    standardized = (features - mean) / std
    design = np.hstack([standardized, np.ones((features.shape[0], 1))])

    targets = np.eye(len(classes))[encoded]
    weights, used_reg = _solve_ridge(design[train_idx], targets[train_idx], l2_reg)
    predicted = np.argmax(design[test_idx] @ weights, axis=1)
    accuracy = float(np.mean(predicted == encoded[test_idx]))
    return ProbeResult(
        accuracy=accuracy,
        num_classes=len(classes),
        train_size=len(train_idx),
        test_size=len(test_idx),
        l2_reg=used_reg,
    )


@dataclass(slots=True)
class ProbeDataset:
    features: np.ndarray
    pixels: np.ndarray
    modality_ids: np.ndarray
    semantic_ids: np.ndarray


def collect_probe_features(
    network: DexNetwork,
    mix: ModalityMixture,
    n_samples: int,
    *,
    batch_size: int = 64,
    seed: int = 0,
) -> ProbeDataset:
    """冻结编码器的均值池化特征，以及对应的原始像素与两类标签。"""
    rng = np.random.default_rng(seed)
    features: list[np.ndarray] = []
    pixels: list[np.ndarray] = []
    modality: list[np.ndarray] = []
    semantic: list[np.ndarray] = []
    remaining = n_samples
    while remaining > 0:
        count = min(batch_size, remaining)
        samples = sample_batch(mix, count, rng)
        images = images_to_array(samples, network.dtype)
        features.append(network.extract_features(images).astype(np.float64))
        pixels.append(images.reshape(count, -1).astype(np.float64))
        modality_ids, semantic_ids = labels_of(samples)
        modality.append(modality_ids)
        semantic.append(semantic_ids)
        remaining -= count
    return ProbeDataset(
        features=np.concatenate(features),
        pixels=np.concatenate(pixels),
        modality_ids=np.concatenate(modality),
        semantic_ids=np.concatenate(semantic),
    )
