from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ValidationError

from ..utils.dicts import set_dotted_value
from ..utils.errors import DexErrorCode, DexException
from ..utils.paths import CONFIG_DIR
from .keys import CONFIG_SECTIONS
from .presets import preset_overrides
from .schema import RunConfig


def parse_override(item: str) -> tuple[str, Any]:
    """`section.field=value`；value 优先按 JSON 解析，失败时保留原始字符串。"""
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise DexException(
            code=DexErrorCode.CONFIG_ERROR,
            message="override must look like section.field=value.",
            detail={"override": item},
        )
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def resolve_config_path(path: Path) -> Path:
    """不存在的裸文件名回退到仓库的 configs/ 目录，例如 `tiny.json`。"""
    if path.is_file() or path.parent != Path("."):
        return path
    bundled = CONFIG_DIR / path.name
    return bundled if bundled.is_file() else path


def _read_json(path: Path) -> dict[str, Any]:
    if not path.is_file():
        raise DexException(
            code=DexErrorCode.CONFIG_ERROR,
            message="config file not found.",
            detail={"path": str(path)},
        )
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DexException(
            code=DexErrorCode.CONFIG_ERROR,
            message="config file is not valid JSON.",
            detail={"path": str(path), "error": str(exc)},
        ) from exc
    if not isinstance(payload, dict):
        raise DexException(
            code=DexErrorCode.CONFIG_ERROR,
            message="config root must be a JSON object.",
            detail={"path": str(path)},
        )
    return payload


def apply_overrides(raw: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    for section in CONFIG_SECTIONS:
        raw.setdefault(section, {})
    for key, value in overrides.items():
        try:
            set_dotted_value(raw, key, value)
        except KeyError as exc:
            raise DexException(
                code=DexErrorCode.CONFIG_ERROR,
                message="unknown config key.",
                detail={"key": key},
            ) from exc
    return raw


def build_run_config(raw: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise DexException(
            code=DexErrorCode.CONFIG_ERROR,
            message="invalid run config.",
            detail={
                "errors": [
                    {"loc": ".".join(str(part) for part in error["loc"]), "msg": error["msg"]}
                    for error in exc.errors()
                ]
            },
        ) from exc


def read_run_config(
    path: Path | None,
    overrides: Iterable[str] = (),
    *,
    preset: str | None = None,
) -> RunConfig:
    """读取 JSON 配置，依次应用预设与命令行覆盖；未知键一律报 CONFIG_ERROR。"""
    raw = _read_json(resolve_config_path(path)) if path is not None else {}
    merged: dict[str, Any] = {}
    if preset:
        try:
            merged.update(preset_overrides(preset))
        except KeyError as exc:
            raise DexException(
                code=DexErrorCode.CONFIG_ERROR,
                message="unknown preset.",
                detail={"preset": preset},
            ) from exc
    for item in overrides:
        key, value = parse_override(item)
        merged[key] = value
    return build_run_config(apply_overrides(raw, merged))


def describe_fields(model: type[BaseModel], prefix: str) -> list[str]:
    """逐字段列出默认值与说明（用于 --help）。"""
    lines: list[str] = []
    for name, info in model.model_fields.items():
        annotation = info.annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel):
            lines.extend(describe_fields(annotation, f"{prefix}{name}."))
            continue
        default = info.get_default(call_default_factory=True)
        if isinstance(default, list) and default and isinstance(default[0], BaseModel):
            default = f"<{len(default)} entries>"
        lines.append(f"  {prefix}{name} = {json.dumps(default, default=str)}  {info.description or ''}")
    return lines


def describe_defaults() -> str:
    return "\n".join(describe_fields(RunConfig, ""))
