"""解析计算量：以乘加次数计，全部为闭式整数表达式。"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import asdict, dataclass
from typing import Literal

from ..backbone import NetworkConfig

RoutingMode = Literal["image", "token"]
NetworkMode = Literal["image", "token", "vit"]


@dataclass(slots=True, frozen=True)
class FlopReport:
    mode: str
    num_tokens: int
    dim: int
    num_experts: int
    batch: int
    top_k: int
    gate_pooling: int
    """图像级：B·N·C 的全局均值池化；逐 token 为 0"""
    gate_projection: int
    """图像级 B·C·R；逐 token B·N·C·R"""
    experts: int
    attention: int

    @property
    def gate(self) -> int:
        return self.gate_pooling + self.gate_projection

    def to_dict(self) -> dict[str, int | str]:
        payload = asdict(self)
        payload["gate"] = self.gate
        return payload


def _require_positive(**values: int) -> None:
    for name, value in values.items():
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}.")


def feed_forward_flops(tokens: int, dim: int, mlp_ratio: int) -> int:
    """两层前馈 C → r·C → C：2·r·C² 次乘加每 token。"""
    return tokens * 2 * mlp_ratio * dim * dim


def attention_flops(batch: int, tokens: int, dim: int) -> int:
    """qkv 与输出投影 4·N·C²，加上打分与加权求和 2·N²·C。"""
    return batch * (4 * tokens * dim * dim + 2 * tokens * tokens * dim)


def count_routing_flops(
    num_tokens: int,
    dim: int,
    num_experts: int,
    batch: int,
    mode: RoutingMode,
    *,
    top_k: int = 2,
    mlp_ratio: int = 4,
) -> FlopReport:
    _require_positive(
        num_tokens=num_tokens,
        dim=dim,
        num_experts=num_experts,
        batch=batch,
        top_k=top_k,
        mlp_ratio=mlp_ratio,
    )
    if mode == "image":
        pooling = batch * num_tokens * dim
        projection = batch * dim * num_experts
    elif mode == "token":
        pooling = 0
        projection = batch * num_tokens * dim * num_experts
    else:
        raise ValueError(f"Unsupported routing mode: {mode}")
    return FlopReport(
        mode=mode,
        num_tokens=num_tokens,
        dim=dim,
        num_experts=num_experts,
        batch=batch,
        top_k=top_k,
        gate_pooling=pooling,
        gate_projection=projection,
        experts=batch * top_k * feed_forward_flops(num_tokens, dim, mlp_ratio),
        attention=attention_flops(batch, num_tokens, dim),
    )


@dataclass(slots=True, frozen=True)
class NetworkFlops:
    mode: str
    image_size: int
    num_tokens: int
    batch: int
    patch_embed: int
    attention: int
    gate: int
    feed_forward: int
    """DEX 为被激活专家之和；普通 ViT 为单个 MLP"""
    director: int
    """仅训练时计算的 director 前向"""

    @property
    def inference(self) -> int:
        return self.patch_embed + self.attention + self.gate + self.feed_forward

    @property
    def training_forward(self) -> int:
        return self.inference + self.director

    def to_dict(self) -> dict[str, int | str]:
        payload = asdict(self)
        payload["inference"] = self.inference
        payload["training_forward"] = self.training_forward
        return payload


def count_network_flops(
    config: NetworkConfig,
    batch: int,
    mode: NetworkMode,
    *,
    image_size: int | None = None,
) -> NetworkFlops:
    """编码器前向计算量；mode="vit" 为同宽度的普通 ViT 基线。"""
    size = image_size if image_size is not None else config.image_size
    if size % config.patch_size != 0:
        raise ValueError("image_size must be divisible by patch_size.")
    tokens = (size // config.patch_size) ** 2
    dim = config.embed_dim
    depth = config.depth
    patch = batch * tokens * config.patch_dim * dim
    attention = depth * attention_flops(batch, tokens, dim)
    mlp = batch * feed_forward_flops(tokens, dim, config.mlp_ratio)

    if mode == "vit":
        return NetworkFlops(
            mode=mode,
            image_size=size,
            num_tokens=tokens,
            batch=batch,
            patch_embed=patch,
            attention=attention,
            gate=0,
            feed_forward=depth * mlp,
            director=0,
        )
    routing = count_routing_flops(
        tokens,
        dim,
        config.num_experts,
        batch,
        mode,
        top_k=config.top_k,
        mlp_ratio=config.mlp_ratio,
    )
    return NetworkFlops(
        mode=mode,
        image_size=size,
        num_tokens=tokens,
        batch=batch,
        patch_embed=patch,
        attention=attention,
        gate=depth * routing.gate,
        feed_forward=depth * routing.experts,
        director=depth * mlp,
    )


def overhead_sweep(
    config: NetworkConfig,
    image_sizes: Iterable[int],
    batch_sizes: Iterable[int],
) -> list[dict[str, float | int]]:
    """相对普通 ViT 的门控开销：图像级与逐 token 两种激活方式。"""
    rows: list[dict[str, float | int]] = []
    batches = list(batch_sizes)
    for size in image_sizes:
        for batch in batches:
            vit = count_network_flops(config, batch, "vit", image_size=size)
            image = count_network_flops(config, batch, "image", image_size=size)
            token = count_network_flops(config, batch, "token", image_size=size)
            rows.append(
                {
                    "image_size": size,
                    "num_tokens": vit.num_tokens,
                    "batch": batch,
                    "vit_flops": vit.inference,
                    "image_wise_flops": image.inference,
                    "token_wise_flops": token.inference,
                    "image_wise_gate_overhead": image.gate / vit.inference,
                    "token_wise_gate_overhead": token.gate / vit.inference,
                }
            )
    return rows
