"""DEX 编码器 + 轻量 MAE 解码器。"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..dexblock import BlockOutput, DexBlock, RoutingDecision, dex_block_forward
from ..ndtensor import Module, Tensor, ops
from ..ndtensor.init import normal, resolve_dtype
from ..ndtensor.layers import LayerNorm, Linear, TransformerBlock
from ..utils.errors import DexErrorCode, DexException
from .embed import patch_embed, patchify, sincos_2d
from .losses import total_loss
from .masking import MaskInfo, apply_mask, sample_mask
from .schema import LossWeights, NetworkConfig


@dataclass(slots=True)
class LayerRecord:
    routing: RoutingDecision
    alignment: Tensor
    balance: Tensor
    director_features: np.ndarray = field(repr=False)


@dataclass(slots=True)
class EncoderOutput:
    features: Tensor
    """最后一层（含归一化）的 token 特征"""
    records: list[LayerRecord]


@dataclass(slots=True)
class ForwardResult:
    loss_total: Tensor
    loss_self: Tensor
    records: list[LayerRecord]
    mask: MaskInfo

    @property
    def alignment_per_layer(self) -> list[float]:
        return [record.alignment.item() for record in self.records]

    @property
    def balance_per_layer(self) -> list[float]:
        return [record.balance.item() for record in self.records]

    @property
    def routing_indices(self) -> list[np.ndarray]:
        return [record.routing.topk_indices for record in self.records]

    @property
    def director_targets(self) -> list[np.ndarray]:
        return [record.director_features for record in self.records]


@dataclass(slots=True, eq=False)
class MaeDecoder(Module):
    embed: Linear
    mask_token: Tensor
    blocks: list[TransformerBlock]
    norm: LayerNorm
    pred: Linear
    pos_embed: np.ndarray = field(repr=False)


def encode(
    tokens: Tensor,
    blocks: Sequence[DexBlock],
    *,
    training: bool,
    rng: np.random.Generator | None = None,
    pinned: Sequence[np.ndarray] | None = None,
    top_k: int | None = None,
    director_targets: Sequence[np.ndarray] | None = None,
) -> tuple[Tensor, list[LayerRecord]]:
    """依次应用 DEX 模块，记录每层的路由与损失。"""
    for name, per_layer in (("pinned", pinned), ("director_targets", director_targets)):
        if per_layer is not None and len(per_layer) != len(blocks):
            raise DexException(
                code=DexErrorCode.CONTRACT_ERROR,
                message=f"{name} must provide one entry per block.",
                detail={name: len(per_layer), "blocks": len(blocks)},
            )
    records: list[LayerRecord] = []
    x = tokens
    for layer, block in enumerate(blocks):
        output: BlockOutput = dex_block_forward(
            x,
            block,
            training=training,
            rng=rng,
            pinned_indices=pinned[layer] if pinned is not None else None,
            top_k=top_k,
            director_target=director_targets[layer] if director_targets is not None else None,
        )
        x = output.tokens
        records.append(
            LayerRecord(
                routing=output.routing,
                alignment=output.alignment,
                balance=output.balance,
                director_features=output.director_features,
            )
        )
    return x, records


def decode_and_reconstruct(
    features: Tensor,
    mask: MaskInfo,
    decoder: MaeDecoder,
    target_patches: np.ndarray,
) -> Tensor:
    """在掩码位置插入 mask token，经普通 Transformer 解码，只在掩码 patch 上算 MSE。"""
    batch = features.shape[0]
    num_masked = mask.ids_restore.shape[1] - mask.ids_keep.shape[1]
    x = decoder.embed(features)
    filler = ops.broadcast_rows(decoder.mask_token, (batch, num_masked))
    x = ops.concat([x, filler], axis=1)
    x = ops.index(x, (np.arange(batch)[:, None], mask.ids_restore))
    x = ops.add(x, Tensor(decoder.pos_embed.astype(x.dtype)))
    for block in decoder.blocks:
        x = block(x)
    pred = decoder.pred(decoder.norm(x))

    rows, cols = np.nonzero(mask.mask)
    target = Tensor(target_patches[rows, cols].astype(pred.dtype))
    return ops.mse(ops.index(pred, (rows, cols)), target)


@dataclass(slots=True, eq=False)
class DexNetwork(Module):
    config: NetworkConfig
    patch_proj: Linear
    blocks: list[DexBlock]
    norm: LayerNorm
    decoder: MaeDecoder
    pos_embed: np.ndarray = field(repr=False)

    @classmethod
    def create(
        cls,
        config: NetworkConfig,
        *,
        seed: int | Sequence[int],
        precision: str = "float32",
        sigma: float = 1.0,
        mu: float = 0.99,
        momentum: float = 0.99,
    ) -> DexNetwork:
        dtype = resolve_dtype(precision)
        rng = np.random.default_rng(seed)
        dim = config.embed_dim
        blocks = [
            DexBlock.create(
                rng,
                dim=dim,
                heads=config.heads,
                num_experts=config.num_experts,
                top_k=config.top_k,
                dtype=dtype,
                mlp_ratio=config.mlp_ratio,
                sigma=sigma,
                mu=mu,
                momentum=momentum,
                gate_init_std=config.gate_init_std,
            )
            for _ in range(config.depth)
        ]
        decoder = MaeDecoder(
            embed=Linear.create(rng, dim, config.decoder_dim, dtype),
            mask_token=normal(rng, (config.decoder_dim,), 0.02, dtype),
            blocks=[
                TransformerBlock.create(
                    rng, config.decoder_dim, config.decoder_heads, config.mlp_ratio, dtype
                )
                for _ in range(config.decoder_depth)
            ],
            norm=LayerNorm.create(config.decoder_dim, dtype),
            pred=Linear.create(rng, config.decoder_dim, config.patch_dim, dtype),
            pos_embed=sincos_2d(config.decoder_dim, config.grid_size),
        )
        return cls(
            config=config,
            patch_proj=Linear.create(rng, config.patch_dim, dim, dtype),
            blocks=blocks,
            norm=LayerNorm.create(dim, dtype),
            decoder=decoder,
            pos_embed=sincos_2d(dim, config.grid_size),
        )

    @property
    def dtype(self) -> np.dtype:
        return self.patch_proj.weight.dtype

    def embed(self, images: np.ndarray) -> Tensor:
        return patch_embed(images, self.patch_proj, self.pos_embed, self.config.patch_size)

    def set_sigma(self, sigma: float) -> None:
        for block in self.blocks:
            block.gate.sigma = sigma

    def forward(
        self,
        images: np.ndarray,
        *,
        weights: LossWeights,
        training: bool,
        rng: np.random.Generator | None = None,
        mask: MaskInfo | None = None,
        pinned: Sequence[np.ndarray] | None = None,
        director_targets: Sequence[np.ndarray] | None = None,
    ) -> ForwardResult:
        """掩码重建前向并组装总损失 L_DEX。"""
        tokens = self.embed(images)
        if mask is None:
            if rng is None:
                raise ValueError("forward without an explicit mask requires an rng.")
            mask = sample_mask(
                tokens.shape[0], tokens.shape[1], self.config.mask_ratio, rng
            )
        if mask.num_masked == 0:
            raise DexException(
                code=DexErrorCode.CONFIG_ERROR,
                message="mask_ratio masks no token at this patch count.",
                detail={"mask_ratio": self.config.mask_ratio, "num_patches": tokens.shape[1]},
            )
        visible = apply_mask(tokens, mask)
        encoded, records = encode(
            visible,
            self.blocks,
            training=training,
            rng=rng,
            pinned=pinned,
            director_targets=director_targets,
        )
        features = self.norm(encoded)
        loss_self = decode_and_reconstruct(
            features, mask, self.decoder, patchify(images, self.config.patch_size)
        )
        loss = total_loss(
            loss_self,
            [record.alignment for record in records],
            [record.balance for record in records],
            weights,
        )
        return ForwardResult(
            loss_total=loss,
            loss_self=loss_self,
            records=records,
            mask=mask,
        )

    def encode_full(
        self,
        images: np.ndarray,
        *,
        top_k: int | None = None,
    ) -> EncoderOutput:
        """评估模式、不掩码的编码（探针与激活统计使用）。"""
        encoded, records = encode(
            self.embed(images), self.blocks, training=False, top_k=top_k
        )
        return EncoderOutput(features=self.norm(encoded), records=records)

    def extract_features(self, images: np.ndarray) -> np.ndarray:
        """最后一层特征沿 token 均值池化 → [B, C]。"""
        return self.encode_full(images).features.data.mean(axis=1)
