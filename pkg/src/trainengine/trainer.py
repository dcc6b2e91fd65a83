"""预训练循环：前向 → 总损失 → 反向 → AdamW → 逐层 GEMA 与频率 EMA。"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..backbone import DexNetwork, ForwardResult, LossWeights, NetworkConfig
from ..dexblock import apply_block_updates
from ..ndtensor import backward
from ..synthgen import ModalityMixture, images_to_array, sample_batch
from ..utils.errors import DexErrorCode, DexException
from ..utils.log import logger
from .checkpoint import load_checkpoint, restore_rng, save_checkpoint
from .metrics import MetricsWriter, RunMetrics
from .optim import AdamW, clip_grad_norm
from .schedules import schedules
from .schema import TrainConfig

DATA_STREAM = 0
MODEL_STREAM = 1
INIT_STREAM = 2


@dataclass(slots=True)
class Trainer:
    network: DexNetwork
    config: TrainConfig
    optimizer: AdamW
    data_rng: np.random.Generator
    """批数据采样流"""
    model_rng: np.random.Generator
    """掩码与路由噪声流"""
    step: int = 0
    history: list[RunMetrics] = field(default_factory=list)

    @classmethod
    def create(cls, network_config: NetworkConfig, config: TrainConfig) -> Trainer:
        network = DexNetwork.create(
            network_config,
            seed=[config.seed, INIT_STREAM],
            precision=config.precision,
            sigma=config.sigma_init,
            mu=config.mu,
            momentum=config.m_init,
        )
        optimizer = AdamW(
            params=[
                (name, tensor)
                for name, tensor in network.named_parameters()
                if tensor.requires_grad
            ],
            weight_decay=config.weight_decay,
        )
        return cls(
            network=network,
            config=config,
            optimizer=optimizer,
            data_rng=np.random.default_rng([config.seed, DATA_STREAM]),
            model_rng=np.random.default_rng([config.seed, MODEL_STREAM]),
        )

    def next_batch(self, mixture: ModalityMixture) -> np.ndarray:
        samples = sample_batch(mixture, self.config.batch_size, self.data_rng)
        return images_to_array(samples, self.network.dtype)

    def _abort(self, result: ForwardResult, reason: str) -> DexException:
        detail = {
            "step": self.step,
            "reason": reason,
            "loss_total": result.loss_total.item(),
            "loss_self": result.loss_self.item(),
            "loss_co_per_layer": result.alignment_per_layer,
            "loss_bal_per_layer": result.balance_per_layer,
        }
        logger.error("train.abort", detail)
        return DexException(
            code=DexErrorCode.NUMERIC_ERROR,
            message="training aborted on a non-finite value.",
            detail=detail,
        )

    def train_step(self, images: np.ndarray) -> RunMetrics:
        config = self.config
        t = self.step
        values = schedules(t, config)
        self.network.set_sigma(values.sigma)
        weights = LossWeights.for_depth(
            len(self.network.blocks), config.lambda_co, values.lambda_bal
        )

        self.optimizer.zero_grad()
        result = self.network.forward(
            images, weights=weights, training=True, rng=self.model_rng
        )
        loss_value = result.loss_total.item()
        if not np.isfinite(loss_value):
            raise self._abort(result, "loss")

        backward(result.loss_total)
        if config.grad_clip is not None:
            clip_grad_norm(
                [tensor for _, tensor in self.optimizer.params], config.grad_clip
            )
        try:
            self.optimizer.step(values.lr)
        except DexException as exc:
            if exc.code is DexErrorCode.NUMERIC_ERROR:
                raise self._abort(result, "gradient") from exc
            raise

        for block, record in zip(self.network.blocks, result.records):
            apply_block_updates(block, record.routing, values.m)

        self.step += 1
        metrics = RunMetrics(
            step=t,
            loss_total=loss_value,
            loss_self=result.loss_self.item(),
            loss_co_per_layer=result.alignment_per_layer,
            loss_bal_per_layer=result.balance_per_layer,
            lr=values.lr,
            m=values.m,
            sigma=values.sigma,
            lambda_bal=values.lambda_bal,
        )
        self.history.append(metrics)
        if self.step == 1 or self.step % config.log_every == 0 or self.step == config.steps:
            logger.info("train.step", metrics.to_dict())
        return metrics

    def rng_states(self) -> dict[str, Any]:
        return {
            "data": self.data_rng.bit_generator.state,
            "model": self.model_rng.bit_generator.state,
        }

    def save(self, path: Path, config_snapshot: dict[str, Any]) -> Path:
        return save_checkpoint(
            path,
            self.network,
            step=self.step,
            config=config_snapshot,
            optimizer=self.optimizer,
            rng_states=self.rng_states(),
        )

    def resume(self, path: Path) -> None:
        """从检查点恢复参数、优化器矩估计、步数与两条随机流。"""
        data = load_checkpoint(path, self.network, self.optimizer)
        self.step = data.step
        if "data" in data.rng_states:
            self.data_rng = restore_rng(data.rng_states["data"])
        if "model" in data.rng_states:
            self.model_rng = restore_rng(data.rng_states["model"])

    def run(
        self,
        mixture: ModalityMixture,
        metrics_path: Path,
        checkpoint_path: Path | None = None,
        *,
        config_snapshot: dict[str, Any] | None = None,
    ) -> list[RunMetrics]:
        """训练到 config.steps 步，逐步写指标，最后写检查点。"""
        logger.info(
            "train.start",
            {
                "steps": self.config.steps,
                "batch_size": self.config.batch_size,
                "precision": self.config.precision,
                "seed": self.config.seed,
            },
        )
        with MetricsWriter(metrics_path, append=self.step > 0) as writer:
            while self.step < self.config.steps:
                writer.write(self.train_step(self.next_batch(mixture)))
        if checkpoint_path is not None:
            self.save(checkpoint_path, config_snapshot or {})
        logger.info(
            "train.done",
            {"step": self.step, "loss_total": self.history[-1].loss_total if self.history else None},
        )
        return self.history
