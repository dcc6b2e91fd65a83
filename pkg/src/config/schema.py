from __future__ import annotations

from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field

from ..backbone import NetworkConfig
from ..synthgen import ModalityMixture
from ..trainengine import TrainConfig


class RunConfig(BaseModel):
    """一次运行的完整配置：网络、训练、数据与输出目录。"""

    model_config = ConfigDict(extra="forbid")

    network: NetworkConfig = Field(default_factory=NetworkConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: ModalityMixture = Field(default_factory=ModalityMixture)
    output_dir: str = Field("runs/default", description="输出目录（指标、检查点、分析报告）")

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    def snapshot(self) -> dict:
        return self.model_dump(mode="json")
