from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ndtensor import Tensor, ops


@dataclass(slots=True)
class MaskInfo:
    ids_keep: np.ndarray
    """[B, N_visible]，可见 token 的位置（升序）"""
    ids_restore: np.ndarray
    """[B, N]，把 (可见 ++ 掩码) 顺序还原为原始顺序的索引"""
    mask: np.ndarray
    """[B, N]，True 表示被掩码"""

    @property
    def num_masked(self) -> int:
        return int(self.mask[0].sum())


def sample_mask(
    batch: int,
    num_tokens: int,
    mask_ratio: float,
    rng: np.random.Generator,
) -> MaskInfo:
    """每张图独立、均匀地随机掩去 ⌊ratio·N⌋ 个 token。"""
    if not 0.0 < mask_ratio < 1.0:
        raise ValueError("mask_ratio must lie in (0, 1).")
    num_masked = math.floor(mask_ratio * num_tokens)
    order = np.argsort(rng.random((batch, num_tokens)), axis=1)
    ids_keep = np.sort(order[:, num_masked:], axis=1)
    ids_masked = np.sort(order[:, :num_masked], axis=1)
    ids_shuffle = np.concatenate([ids_keep, ids_masked], axis=1)
    ids_restore = np.argsort(ids_shuffle, axis=1)

    mask = np.zeros((batch, num_tokens), dtype=bool)
    mask[np.arange(batch)[:, None], ids_masked] = True
    return MaskInfo(ids_keep=ids_keep, ids_restore=ids_restore, mask=mask)


def apply_mask(tokens: Tensor, mask: MaskInfo) -> Tensor:
    rows = np.arange(tokens.shape[0])[:, None]
    return ops.index(tokens, (rows, mask.ids_keep))


def mask_tokens(
    tokens: Tensor,
    mask_ratio: float,
    rng: np.random.Generator,
) -> tuple[Tensor, MaskInfo]:
    mask = sample_mask(tokens.shape[0], tokens.shape[1], mask_ratio, rng)
    return apply_mask(tokens, mask), mask
