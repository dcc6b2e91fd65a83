from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

ShapeName = Literal["disc", "square", "cross", "ring"]

SHAPES: tuple[ShapeName, ...] = ("disc", "square", "cross", "ring")
PROPORTION_TOL = 1e-6


class ModalityStyle(BaseModel):
    """单个模态的成像风格：背景噪声频带与前景对比度。"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    center_frequency: float = Field(gt=0.0, description="背景带通中心频率（每图像周期数）")
    bandwidth: float = Field(1.2, gt=0.0, description="带通半宽（周期数）")
    noise_amplitude: float = Field(0.08, gt=0.0, le=0.2, description="背景噪声标准差")
    contrast: float = Field(0.3, ge=-1.0, le=1.0, description="前景形状的强度增量（可为负）")
    gamma: float = Field(1.0, gt=0.0, description="合成后逐像素的 gamma 校正")
    offset: float = Field(0.45, ge=0.0, le=1.0, description="背景基准强度")


def default_styles() -> list[ModalityStyle]:
    return [
        ModalityStyle(center_frequency=5.0, noise_amplitude=0.10, contrast=0.30, gamma=1.0, offset=0.20),
        ModalityStyle(center_frequency=8.0, noise_amplitude=0.09, contrast=-0.30, gamma=0.9, offset=0.40),
        ModalityStyle(center_frequency=11.0, noise_amplitude=0.08, contrast=0.25, gamma=1.1, offset=0.60),
        ModalityStyle(center_frequency=14.0, noise_amplitude=0.08, contrast=-0.25, gamma=1.0, offset=0.80),
    ]


class ModalityMixture(BaseModel):
    """P_mix = Σ_d ρ_d · P_d：先按 ρ 抽模态，再按该模态风格渲染图像。"""

    model_config = ConfigDict(extra="forbid")

    image_size: int = Field(32, ge=8, description="生成图像边长（像素）")
    proportions: list[float] = Field(
        default_factory=lambda: [0.25, 0.25, 0.25, 0.25],
        description="模态混合比例 ρ（非负且和为 1）",
    )
    styles: list[ModalityStyle] = Field(
        default_factory=default_styles,
        description="每个模态的风格参数，两两不同",
    )
    shapes: list[ShapeName] = Field(
        default_factory=lambda: list(SHAPES),
        description="语义类别（形状集合）",
    )
    hflip: bool = Field(False, description="是否以 0.5 概率水平翻转")
    seed: int = Field(0, description="按索引生成样本时使用的种子")

    @model_validator(mode="after")
    def _check_mixture(self) -> ModalityMixture:
        if len(self.proportions) != len(self.styles):
            raise ValueError("proportions and styles must have the same length.")
        if not self.proportions:
            raise ValueError("at least one modality is required.")
        if any(value < 0 for value in self.proportions):
            raise ValueError("proportions must be non-negative.")
        if not math.isclose(sum(self.proportions), 1.0, abs_tol=PROPORTION_TOL):
            raise ValueError("proportions must sum to 1.")
        if len(set(self.styles)) != len(self.styles):
            raise ValueError("modality styles must be pairwise distinct.")
        if not self.shapes or len(set(self.shapes)) != len(self.shapes):
            raise ValueError("shapes must be a non-empty set.")
        nyquist = self.image_size / 2
        for style in self.styles:
            if style.center_frequency + style.bandwidth > nyquist:
                raise ValueError("style band exceeds the Nyquist frequency of image_size.")
        return self

    @property
    def num_modalities(self) -> int:
        return len(self.styles)

    @property
    def num_classes(self) -> int:
        return len(self.shapes)

    def probabilities(self) -> np.ndarray:
        values = np.asarray(self.proportions, dtype=np.float64)
        return values / values.sum()


@dataclass(slots=True)
class Latents:
    modality_ids: np.ndarray
    """[B]"""
    semantic_ids: np.ndarray
    """[B]"""
    centers: np.ndarray
    """[B, 2]，(x, y) 像素坐标"""
    scales: np.ndarray
    """[B]，形状半径（像素）"""
    flips: np.ndarray
    """[B]，bool"""


@dataclass(slots=True)
class Sample:
    image: np.ndarray
    """[H, W]，取值 [0, 1]"""
    modality_id: int
    semantic_id: int
    center_x: float
    center_y: float
    scale: float
