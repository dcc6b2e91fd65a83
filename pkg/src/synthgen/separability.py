from __future__ import annotations

import numpy as np

from ..utils.log import logger
from .generator import POSITION_JITTER, SCALE_RANGE, band_mask, render
from .schema import ModalityMixture

MIN_PER_MODALITY = 100


def band_energy_scores(images: np.ndarray, mix: ModalityMixture) -> np.ndarray:
    """每张图在各模态频带内的平均功率，按该模态背景的期望功率归一化 → [n, D]。

    纯带通背景的期望为 a_d² · N_pix² / n_bins_d（Parseval）。
    """
    size = mix.image_size
    centered = images - images.mean(axis=(-2, -1), keepdims=True)
    power = np.abs(np.fft.fft2(centered)) ** 2
    pixels = size * size
    columns = []
    for style in mix.styles:
        mask = band_mask(size, style)
        expected = style.noise_amplitude**2 * pixels**2 / mask.sum()
        columns.append(power[:, mask].mean(axis=1) / expected)
    return np.stack(columns, axis=1)


def modality_separability_check(
    mix: ModalityMixture,
    n_per_modality: int = MIN_PER_MODALITY,
    *,
    seed: int = 0,
) -> float:
    """用固定的频带能量统计量判别模态，返回准确率。"""
    if n_per_modality < MIN_PER_MODALITY:
        raise ValueError(f"n_per_modality must be >= {MIN_PER_MODALITY}.")
    rng = np.random.default_rng(seed)
    size = mix.image_size
    images: list[np.ndarray] = []
    truth: list[int] = []
    for modality_id in range(mix.num_modalities):
        for _ in range(n_per_modality):
            center = size / 2.0 + rng.uniform(-POSITION_JITTER, POSITION_JITTER, size=2) * size
            sample = render(
                mix,
                modality_id,
                int(rng.integers(0, mix.num_classes)),
                (float(center[0]), float(center[1])),
                float(rng.uniform(*SCALE_RANGE) * size),
                rng,
            )
            images.append(sample.image)
            truth.append(modality_id)

    scores = band_energy_scores(np.stack(images), mix)
    predicted = np.argmax(scores, axis=1)
    accuracy = float(np.mean(predicted == np.asarray(truth)))
    logger.info(
        "synthgen.separability",
        {
            "modalities": mix.num_modalities,
            "n_per_modality": n_per_modality,
            "accuracy": accuracy,
        },
    )
    return accuracy
