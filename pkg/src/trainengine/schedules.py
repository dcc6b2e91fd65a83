"""按优化器步调度的超参数：学习率、GEMA 动量、路由噪声与 λ_bal。"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .schema import TrainConfig


@dataclass(slots=True, frozen=True)
class ScheduleValues:
    lr: float
    m: float
    sigma: float
    lambda_bal: float


def cosine_decay(step: int, total: int) -> float:
    """(1 + cos(π·t/T)) / 2：t=0 为 1，t=T 为 0。"""
    if total <= 0:
        return 0.0
    progress = min(max(step / total, 0.0), 1.0)
    return (1.0 + math.cos(math.pi * progress)) / 2.0


def learning_rate(step: int, config: TrainConfig) -> float:
    """线性预热到基础学习率，之后余弦退火到 0。"""
    base = config.effective_lr
    warmup = config.warmup_steps
    if warmup > 0 and step < warmup:
        return base * step / warmup
    return base * cosine_decay(step - warmup, config.steps - warmup)


def gema_momentum(step: int, config: TrainConfig) -> float:
    """m(t) = m_final − (m_final − m_init)·(1 + cos(π·t/T))/2，单调不减。"""
    return config.m_final - (config.m_final - config.m_init) * cosine_decay(step, config.steps)


def noise_sigma(step: int, config: TrainConfig) -> float:
    return config.sigma_init * cosine_decay(step, config.steps)


def balance_weight(step: int, config: TrainConfig) -> float:
    if config.lambda_bal_fixed is not None:
        return config.lambda_bal_fixed
    return config.lambda_bal_init * cosine_decay(step, config.steps)


def schedules(step: int, config: TrainConfig) -> ScheduleValues:
    if not 0 <= step <= config.steps:
        raise ValueError(f"step must lie in [0, {config.steps}], got {step}.")
    return ScheduleValues(
        lr=learning_rate(step, config),
        m=gema_momentum(step, config),
        sigma=noise_sigma(step, config),
        lambda_bal=balance_weight(step, config),
    )
