"""按模态统计各层专家激活质量，并用 JS 散度衡量模态间差异。"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..backbone import DexNetwork, encode
from ..synthgen import ModalityMixture, images_to_array, labels_of, sample_batch
from ..utils.io import save_csv

HISTOGRAM_COLUMNS = ("layer", "modality", "expert", "mass")


@dataclass(slots=True)
class ActivationHistogram:
    layer: int
    num_experts: int
    mass: dict[int, np.ndarray] = field(default_factory=dict)
    """模态 → 累积的 ω 质量 [R]"""
    counts: dict[int, int] = field(default_factory=dict)

    def accumulate(self, modality_ids: np.ndarray, dense_weights: np.ndarray) -> None:
        for modality in np.unique(modality_ids):
            key = int(modality)
            rows = dense_weights[modality_ids == modality]
            current = self.mass.setdefault(key, np.zeros(self.num_experts, dtype=np.float64))
            current += rows.sum(axis=0, dtype=np.float64)
            self.counts[key] = self.counts.get(key, 0) + int(rows.shape[0])

    @property
    def modalities(self) -> list[int]:
        return sorted(self.mass)

    def normalized(self, modality: int) -> np.ndarray:
        values = self.mass[modality]
        return values / values.sum()


def activation_histograms(
    network: DexNetwork,
    mix: ModalityMixture,
    n_samples: int,
    *,
    batch_size: int = 64,
    seed: int = 0,
    noise_sigma: float = 0.0,
) -> list[ActivationHistogram]:
    """在未掩码输入上做评估前向，累积每层、每模态的 ω 质量。

    noise_sigma > 0 时改用带噪路由（σ 取该值），用于打破 π 全零时的并列。
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1.")
    rng = np.random.default_rng(seed)
    histograms = [
        ActivationHistogram(layer=layer, num_experts=block.gate.num_experts)
        for layer, block in enumerate(network.blocks)
    ]
    saved_sigma = [block.gate.sigma for block in network.blocks]
    noisy = noise_sigma > 0.0
    if noisy:
        network.set_sigma(noise_sigma)
    try:
        remaining = n_samples
        while remaining > 0:
            count = min(batch_size, remaining)
            samples = sample_batch(mix, count, rng)
            images = images_to_array(samples, network.dtype)
            modality_ids, _ = labels_of(samples)
            _, records = encode(
                network.embed(images),
                network.blocks,
                training=noisy,
                rng=rng if noisy else None,
            )
            for histogram, record in zip(histograms, records):
                histogram.accumulate(modality_ids, record.routing.dense_weights())
            remaining -= count
    finally:
        for block, sigma in zip(network.blocks, saved_sigma):
            block.gate.sigma = sigma
    return histograms


def jensen_shannon(p: np.ndarray, q: np.ndarray) -> float:
    """以 2 为底的 JS 散度，取值 [0, 1]。"""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(a: np.ndarray, b: np.ndarray) -> float:
        support = a > 0
        return float(np.sum(a[support] * np.log2(a[support] / b[support])))

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


def mean_pairwise_js(histogram: ActivationHistogram) -> float:
    pairs = list(itertools.combinations(histogram.modalities, 2))
    if not pairs:
        return 0.0
    return float(
        np.mean(
            [
                jensen_shannon(histogram.normalized(a), histogram.normalized(b))
                for a, b in pairs
            ]
        )
    )


def write_histogram_csv(path: Path, histograms: Sequence[ActivationHistogram]) -> Path:
    rows = [
        [histogram.layer, modality, expert, repr(float(mass))]
        for histogram in histograms
        for modality in histogram.modalities
        for expert, mass in enumerate(histogram.normalized(modality))
    ]
    return save_csv(path, HISTOGRAM_COLUMNS, rows)

