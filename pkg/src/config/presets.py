"""消融预设：在用户覆盖之前应用的点分键覆盖集合。"""

from __future__ import annotations

from typing import Any

from .keys import (
    NETWORK_NUM_EXPERTS_KEY,
    NETWORK_TOP_K_KEY,
    TRAIN_LAMBDA_BAL_FIXED_KEY,
    TRAIN_LAMBDA_BAL_INIT_KEY,
    TRAIN_LAMBDA_CO_KEY,
)

PRESETS: dict[str, dict[str, Any]] = {
    # 单专家、无辅助损失：退化为普通 MAE
    "mae": {
        NETWORK_NUM_EXPERTS_KEY: 1,
        NETWORK_TOP_K_KEY: 1,
        TRAIN_LAMBDA_CO_KEY: 0.0,
        TRAIN_LAMBDA_BAL_INIT_KEY: 0.0,
        TRAIN_LAMBDA_BAL_FIXED_KEY: 0.0,
    },
    # 专家池但无 director 协调
    "experts": {
        TRAIN_LAMBDA_CO_KEY: 0.0,
    },
    "full": {},
}


def preset_overrides(name: str) -> dict[str, Any]:
    normalized = name.strip().lower()
    if normalized not in PRESETS:
        raise KeyError(f"Unknown preset: {name!r}")
    return dict(PRESETS[normalized])
