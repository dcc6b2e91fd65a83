from __future__ import annotations

from typing import Any


def set_dotted_value(data: dict[str, Any], dotted_key: str, value: Any) -> None:
    """按 `a.b.c` 路径写入嵌套字典；中间层缺失时抛出 KeyError。"""
    keys = [key.strip() for key in dotted_key.split(".")]
    if not keys or any(not key for key in keys):
        raise KeyError(f"Invalid dotted key: {dotted_key!r}")

    current: Any = data
    for key in keys[:-1]:
        if not isinstance(current, dict) or key not in current:
            raise KeyError(f"Unknown config section: {dotted_key!r}")
        current = current[key]
    if not isinstance(current, dict):
        raise KeyError(f"Unknown config section: {dotted_key!r}")
    current[keys[-1]] = value
