from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

METRIC_KEYS = (
    "step",
    "loss_total",
    "loss_self",
    "loss_co_per_layer",
    "loss_bal_per_layer",
    "lr",
    "m",
    "sigma",
    "lambda_bal",
)


@dataclass(slots=True)
class RunMetrics:
    step: int
    """本步使用的调度步 t（从 0 开始）；lr、m、sigma、lambda_bal 均为 t 处的取值"""
    loss_total: float
    loss_self: float
    loss_co_per_layer: list[float]
    loss_bal_per_layer: list[float]
    lr: float
    m: float
    sigma: float
    lambda_bal: float

    def to_dict(self) -> dict[str, Any]:
        return {key: getattr(self, key) for key in METRIC_KEYS}


@dataclass(slots=True)
class MetricsWriter:
    """追加写入的 JSON-lines 指标文件，每步一行，键顺序固定。"""

    path: Path
    append: bool = False
    """续训时追加到已有文件"""
    _handle: IO[str] | None = field(default=None, init=False, repr=False)

    def __enter__(self) -> MetricsWriter:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("a" if self.append else "w", encoding="utf-8", newline="")
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    def write(self, metrics: RunMetrics) -> None:
        if self._handle is None:
            raise RuntimeError("MetricsWriter is not open.")
        self._handle.write(json.dumps(metrics.to_dict(), ensure_ascii=False) + "\n")
        self._handle.flush()

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def read_metrics(path: Path) -> list[dict[str, Any]]:
    with path.open(encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]
