from .checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    CheckpointData,
    apply_checkpoint,
    load_checkpoint,
    read_checkpoint,
    restore_rng,
    save_checkpoint,
)
from .metrics import METRIC_KEYS, MetricsWriter, RunMetrics, read_metrics
from .optim import AdamW, adamw_step, clip_grad_norm, global_grad_norm
from .schedules import ScheduleValues, cosine_decay, schedules
from .schema import TrainConfig
from .trainer import Trainer

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "METRIC_KEYS",
    "AdamW",
    "CheckpointData",
    "MetricsWriter",
    "RunMetrics",
    "ScheduleValues",
    "TrainConfig",
    "Trainer",
    "adamw_step",
    "apply_checkpoint",
    "clip_grad_norm",
    "cosine_decay",
    "global_grad_norm",
    "load_checkpoint",
    "read_checkpoint",
    "read_metrics",
    "restore_rng",
    "save_checkpoint",
    "schedules",
]
