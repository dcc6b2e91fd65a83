from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..ndtensor.init import PRECISIONS

REFERENCE_BATCH = 512


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(2000, ge=1, description="优化器步数 T")
    warmup: float = Field(0.1, gt=0.0, lt=1.0, description="学习率线性预热占总步数的比例")
    base_lr: float = Field(1e-4, gt=0.0, description="基础学习率")
    lr_batch_scaling: bool = Field(False, description="按 B/512 缩放基础学习率")
    batch_size: int = Field(64, ge=1, description="批大小 B")
    weight_decay: float = Field(0.05, ge=0.0, description="AdamW 解耦权重衰减")
    lambda_co: float = Field(0.1, ge=0.0, description="对齐损失权重 λ_co")
    lambda_bal_init: float = Field(0.01, ge=0.0, description="均衡损失权重初值（余弦衰减到 0）")
    lambda_bal_fixed: float | None = Field(
        None, ge=0.0, description="若设置，则 λ_bal 固定为该值而不做调度"
    )
    sigma_init: float = Field(1.0, ge=0.0, description="路由噪声标准差初值（余弦衰减到 0）")
    m_init: float = Field(0.99, ge=0.0, le=1.0, description="GEMA 动量初值（余弦升至 1）")
    m_final: float = Field(1.0, ge=0.0, le=1.0, description="GEMA 动量终值")
    mu: float = Field(0.99, ge=0.0, lt=1.0, description="激活频率 EMA 动量 μ")
    seed: int = Field(0, description="随机种子（数据与模型各自派生独立流）")
    precision: str = Field("float32", description="训练精度：float32 或 float64")
    grad_clip: float | None = Field(None, gt=0.0, description="全局梯度范数裁剪阈值，默认关闭")
    log_every: int = Field(50, ge=1, description="每隔多少步输出一次 train.step 日志")

    @model_validator(mode="after")
    def _check_values(self) -> TrainConfig:
        if self.precision.strip().lower() not in PRECISIONS:
            raise ValueError(f"Unsupported precision: {self.precision}")
        if self.m_final < self.m_init:
            raise ValueError("m_final must be >= m_init.")
        return self

    @property
    def warmup_steps(self) -> int:
        return int(round(self.warmup * self.steps))

    @property
    def effective_lr(self) -> float:
        if self.lr_batch_scaling:
            return self.base_lr * self.batch_size / REFERENCE_BATCH
        return self.base_lr
