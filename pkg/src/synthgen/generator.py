"""模态风格化的合成图像：带通噪声背景 + 抗锯齿形状前景。"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .schema import Latents, ModalityMixture, ModalityStyle, Sample

POSITION_JITTER = 0.25
SCALE_RANGE = (0.15, 0.25)


def frequency_radius(size: int) -> np.ndarray:
    """每个 FFT 频点到原点的距离（单位：每图像周期数）。"""
    freqs = np.fft.fftfreq(size) * size
    fy, fx = np.meshgrid(freqs, freqs, indexing="ij")
    return np.sqrt(fx**2 + fy**2)


def band_mask(size: int, style: ModalityStyle) -> np.ndarray:
    return np.abs(frequency_radius(size) - style.center_frequency) <= style.bandwidth


def band_noise(size: int, style: ModalityStyle, rng: np.random.Generator) -> np.ndarray:
    """白噪声经环形带通后归一化到标准差 noise_amplitude。"""
    white = rng.standard_normal((size, size))
    spectrum = np.fft.fft2(white) * band_mask(size, style)
    noise = np.real(np.fft.ifft2(spectrum))
    std = noise.std()
    if std == 0.0:
        return noise
    return noise * (style.noise_amplitude / std)


def shape_mask(
    shape: str,
    size: int,
    center: tuple[float, float],
    scale: float,
) -> np.ndarray:
    """由有符号距离场得到的抗锯齿掩码，取值 [0, 1]。"""
    coords = np.arange(size, dtype=np.float64) + 0.5
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    dx = np.abs(xx - center[0])
    dy = np.abs(yy - center[1])
    radius = np.sqrt(dx**2 + dy**2)

    if shape == "disc":
        distance = radius - scale
    elif shape == "square":
        distance = np.maximum(dx, dy) - 0.85 * scale
    elif shape == "cross":
        arm = scale / 3.0
        distance = np.minimum(
            np.maximum(dx - scale, dy - arm),
            np.maximum(dx - arm, dy - scale),
        )
    elif shape == "ring":
        distance = np.abs(radius - 0.7 * scale) - 0.3 * scale
    else:
        raise ValueError(f"Unsupported shape: {shape}")
    return np.clip(0.5 - distance, 0.0, 1.0)


def draw_latents(
    mix: ModalityMixture,
    batch: int,
    rng: np.random.Generator,
) -> Latents:
    """模态按 ρ 抽取，语义类别均匀抽取且与模态独立。"""
    if batch < 1:
        raise ValueError("batch must be >= 1.")
    size = mix.image_size
    modality_ids = rng.choice(mix.num_modalities, size=batch, p=mix.probabilities())
    semantic_ids = rng.integers(0, mix.num_classes, size=batch)
    jitter = rng.uniform(-POSITION_JITTER, POSITION_JITTER, size=(batch, 2)) * size
    centers = size / 2.0 + jitter
    scales = rng.uniform(*SCALE_RANGE, size=batch) * size
    if mix.hflip:
        flips = rng.random(batch) < 0.5
    else:
        flips = np.zeros(batch, dtype=bool)
    return Latents(
        modality_ids=modality_ids.astype(np.int64),
        semantic_ids=semantic_ids.astype(np.int64),
        centers=centers,
        scales=scales,
        flips=flips,
    )


def render(
    mix: ModalityMixture,
    modality_id: int,
    semantic_id: int,
    center: tuple[float, float],
    scale: float,
    rng: np.random.Generator,
    *,
    flip: bool = False,
) -> Sample:
    style = mix.styles[modality_id]
    size = mix.image_size
    foreground = shape_mask(mix.shapes[semantic_id], size, center, scale)
    image = style.offset + band_noise(size, style, rng) + style.contrast * foreground
    image = np.clip(image, 0.0, 1.0) ** style.gamma
    center_x = center[0]
    if flip:
        image = image[:, ::-1]
        center_x = size - center_x
    return Sample(
        image=np.ascontiguousarray(np.clip(image, 0.0, 1.0)),
        modality_id=int(modality_id),
        semantic_id=int(semantic_id),
        center_x=float(center_x),
        center_y=float(center[1]),
        scale=float(scale),
    )


def sample_batch(
    mix: ModalityMixture,
    batch: int,
    rng: np.random.Generator,
) -> list[Sample]:
    latents = draw_latents(mix, batch, rng)
    return [
        render(
            mix,
            int(latents.modality_ids[i]),
            int(latents.semantic_ids[i]),
            (float(latents.centers[i, 0]), float(latents.centers[i, 1])),
            float(latents.scales[i]),
            rng,
            flip=bool(latents.flips[i]),
        )
        for i in range(batch)
    ]


def sample_at(mix: ModalityMixture, index: int) -> Sample:
    """第 index 个样本只取决于 (mix, mix.seed, index)。"""
    rng = np.random.default_rng([mix.seed, index])
    return sample_batch(mix, 1, rng)[0]


def generate(mix: ModalityMixture, count: int, *, start: int = 0) -> list[Sample]:
    return [sample_at(mix, index) for index in range(start, start + count)]


def images_to_array(
    samples: Sequence[Sample],
    dtype: np.dtype | type = np.float64,
) -> np.ndarray:
    """堆叠为网络输入 [B, 1, H, W]。"""
    return np.stack([sample.image for sample in samples])[:, None, :, :].astype(dtype)


def labels_of(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    """返回 (modality_ids, semantic_ids)。"""
    modality = np.asarray([sample.modality_id for sample in samples], dtype=np.int64)
    semantic = np.asarray([sample.semantic_id for sample in samples], dtype=np.int64)
    return modality, semantic

