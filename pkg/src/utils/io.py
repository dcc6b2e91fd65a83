from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any


def save_file(
    path: Path,
    content: bytes | bytearray | memoryview | str,
    encoding: str = "utf-8",
) -> Path:
    """将内容保存到指定路径，自动创建父目录并返回目标路径。"""
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(content, str):
        # newline="" 保证不同平台写出的字节一致
        with path.open("w", encoding=encoding, newline="") as handle:
            handle.write(content)
    else:
        path.write_bytes(bytes(content))
    return path


def save_json(path: Path, payload: Any) -> Path:
    """以稳定格式（缩进 2、保留字段顺序）写出 JSON。"""
    text = json.dumps(payload, ensure_ascii=False, indent=2, default=str)
    return save_file(path, text + "\n")


def save_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> Path:
    """写出 CSV，行尾统一为 `\\n`。"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return save_file(path, buffer.getvalue())
