from __future__ import annotations

import numpy as np

from ..ndtensor import Tensor, ops
from ..ndtensor.layers import Linear
from ..utils.errors import DexErrorCode, DexException


def patchify(images: np.ndarray, patch_size: int) -> np.ndarray:
    """[B, ch, H, W] → [B, N, ch·p·p]，patch 按行优先编号。"""
    if images.ndim != 4:
        raise DexException(
            code=DexErrorCode.DIMENSION_ERROR,
            message="images must have shape [B, ch, H, W].",
            detail={"shape": images.shape},
        )
    batch, channels, height, width = images.shape
    if height % patch_size != 0 or width % patch_size != 0:
        raise DexException(
            code=DexErrorCode.CONFIG_ERROR,
            message="image extents must be divisible by patch_size.",
            detail={"height": height, "width": width, "patch_size": patch_size},
        )
    rows, cols = height // patch_size, width // patch_size
    patches = images.reshape(batch, channels, rows, patch_size, cols, patch_size)
    patches = patches.transpose(0, 2, 4, 1, 3, 5)
    return np.ascontiguousarray(
        patches.reshape(batch, rows * cols, channels * patch_size * patch_size)
    )


def unpatchify(
    patches: np.ndarray, patch_size: int, channels: int, grid: tuple[int, int]
) -> np.ndarray:
    batch = patches.shape[0]
    rows, cols = grid
    images = patches.reshape(batch, rows, cols, channels, patch_size, patch_size)
    images = images.transpose(0, 3, 1, 4, 2, 5)
    return np.ascontiguousarray(
        images.reshape(batch, channels, rows * patch_size, cols * patch_size)
    )


def _sincos_1d(dim: int, positions: np.ndarray) -> np.ndarray:
    omega = np.arange(dim // 2, dtype=np.float64) / (dim / 2.0)
    omega = 1.0 / 10000**omega
    angles = np.outer(positions.reshape(-1), omega)
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def sincos_2d(dim: int, grid_size: int) -> np.ndarray:
    """固定二维正余弦位置编码 [grid², dim]，一半维度编码行、一半编码列。"""
    if dim % 4 != 0:
        raise DexException(
            code=DexErrorCode.CONFIG_ERROR,
            message="positional embedding dim must be divisible by 4.",
            detail={"dim": dim},
        )
    coords = np.arange(grid_size, dtype=np.float64)
    grid_w, grid_h = np.meshgrid(coords, coords)
    emb_h = _sincos_1d(dim // 2, grid_h)
    emb_w = _sincos_1d(dim // 2, grid_w)
    return np.concatenate([emb_h, emb_w], axis=1)


def patch_embed(
    images: np.ndarray,
    projection: Linear,
    pos_embed: np.ndarray,
    patch_size: int,
) -> Tensor:
    """线性投影展平的 patch，再加上固定位置编码 → [B, N, C]。"""
    patches = patchify(images, patch_size).astype(projection.weight.dtype)
    tokens = projection(Tensor(patches))
    if tokens.shape[1:] != pos_embed.shape:
        raise DexException(
            code=DexErrorCode.CONFIG_ERROR,
            message="token grid does not match the positional embedding.",
            detail={"tokens_shape": tokens.shape, "pos_shape": pos_embed.shape},
        )
    return ops.add(tokens, Tensor(pos_embed.astype(tokens.dtype)))
