from __future__ import annotations

from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field, model_validator


class NetworkConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    image_size: int = Field(32, ge=1, description="输入图像边长（像素）")
    patch_size: int = Field(8, ge=1, description="patch 边长 p")
    channels: int = Field(1, ge=1, description="图像通道数")
    embed_dim: int = Field(32, ge=4, description="编码器宽度 C（需被 4 与 heads 整除）")
    depth: int = Field(2, ge=1, description="DEX 模块层数 L")
    heads: int = Field(4, ge=1, description="编码器自注意力头数")
    mlp_ratio: int = Field(4, ge=1, description="专家 / director 隐层倍数")
    num_experts: int = Field(8, ge=1, description="专家池大小 R")
    top_k: int = Field(2, ge=1, description="每张图激活的专家数 K")
    decoder_dim: int = Field(16, ge=4, description="解码器宽度（默认 C/2）")
    decoder_depth: int = Field(2, ge=1, description="解码器层数")
    decoder_heads: int = Field(4, ge=1, description="解码器注意力头数")
    mask_ratio: float = Field(0.75, gt=0.0, lt=1.0, description="MAE 掩码比例")
    gate_init_std: float = Field(0.02, ge=0.0, description="激活矩阵 π 初始化标准差")

    @model_validator(mode="after")
    def _check_shapes(self) -> NetworkConfig:
        if self.image_size % self.patch_size != 0:
            raise ValueError("image_size must be divisible by patch_size.")
        if self.top_k > self.num_experts:
            raise ValueError("top_k must not exceed num_experts.")
        if self.embed_dim % 4 != 0 or self.embed_dim % self.heads != 0:
            raise ValueError("embed_dim must be divisible by 4 and by heads.")
        if self.decoder_dim % 4 != 0 or self.decoder_dim % self.decoder_heads != 0:
            raise ValueError("decoder_dim must be divisible by 4 and by decoder_heads.")
        return self

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_size * self.grid_size

    @property
    def patch_dim(self) -> int:
        return self.channels * self.patch_size * self.patch_size


@dataclass(slots=True)
class LossWeights:
    lambda_co: float
    """对齐损失权重 λ_co"""
    lambda_bal: float
    """均衡损失权重 λ_bal（由调度给出）"""
    alphas: tuple[float, ...]
    """层因子 α^1..α^L"""

    @classmethod
    def for_depth(cls, depth: int, lambda_co: float, lambda_bal: float) -> LossWeights:
        return cls(
            lambda_co=lambda_co,
            lambda_bal=lambda_bal,
            alphas=layer_factors(depth),
        )


def layer_factors(depth: int) -> tuple[float, ...]:
    """α^l = 1 / (L − (l − 1))，l = 1..L；深层权重更大，α^L = 1。"""
    if depth < 1:
        raise ValueError("depth must be >= 1.")
    return tuple(1.0 / (depth - (layer - 1)) for layer in range(1, depth + 1))
