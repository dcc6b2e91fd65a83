"""检查点文件：8 字节魔数、u64 小端清单长度、UTF-8 JSON 清单、按偏移排列的小端原始数组。"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..ndtensor import Module
from ..utils.errors import DexErrorCode, DexException
from ..utils.io import save_file
from ..utils.log import logger
from .optim import AdamW

MAGIC = b"DEXCKPT1"
MAGIC_PREFIX = b"DEXCKPT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sQ")

PARAM_PREFIX = "param/"
BUFFER_PREFIX = "buffer/"
FIRST_MOMENT_PREFIX = "adam_m/"
SECOND_MOMENT_PREFIX = "adam_v/"


@dataclass(slots=True)
class CheckpointData:
    version: int
    step: int
    config: dict[str, Any]
    arrays: dict[str, np.ndarray]
    rng_states: dict[str, Any] = field(default_factory=dict)
    optimizer_step: int = 0


def _collect_arrays(
    network: Module,
    optimizer: AdamW | None,
) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for name, tensor in network.named_parameters():
        arrays[PARAM_PREFIX + name] = tensor.data
    for name, buffer in network.named_buffers():
        arrays[BUFFER_PREFIX + name] = buffer
    if optimizer is not None:
        for name, value in optimizer.first_moments.items():
            arrays[FIRST_MOMENT_PREFIX + name] = value
        for name, value in optimizer.second_moments.items():
            arrays[SECOND_MOMENT_PREFIX + name] = value
    return arrays


def save_checkpoint(
    path: Path,
    network: Module,
    *,
    step: int,
    config: dict[str, Any],
    optimizer: AdamW | None = None,
    rng_states: dict[str, Any] | None = None,
) -> Path:
    """写出检查点；数组保持训练精度，统一按小端存储。"""
    entries: list[dict[str, Any]] = []
    chunks: list[bytes] = []
    offset = 0
    for name, array in _collect_arrays(network, optimizer).items():
        little = np.ascontiguousarray(array, dtype=array.dtype.newbyteorder("<"))
        raw = little.tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(array.shape),
                "dtype": little.dtype.str,
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)

    manifest = {
        "format_version": FORMAT_VERSION,
        "step": step,
        "config": config,
        "optimizer_step": optimizer.step_count if optimizer is not None else 0,
        "rng_states": rng_states or {},
        "arrays": entries,
    }
    manifest_bytes = json.dumps(manifest, ensure_ascii=False, sort_keys=True).encode("utf-8")
    payload = _HEADER.pack(MAGIC, len(manifest_bytes)) + manifest_bytes + b"".join(chunks)
    save_file(path, payload)
    logger.info(
        "checkpoint.save",
        {"path": str(path), "step": step, "arrays": len(entries), "bytes": len(payload)},
    )
    return path


def _checkpoint_error(code: DexErrorCode, message: str, **detail: Any) -> DexException:
    return DexException(code=code, message=message, detail=detail)


def read_checkpoint(path: Path) -> CheckpointData:
    if not path.is_file():
        raise _checkpoint_error(
            DexErrorCode.CHECKPOINT_FORMAT, "checkpoint file not found.", path=str(path)
        )
    payload = path.read_bytes()
    if len(payload) < _HEADER.size:
        if not payload.startswith(MAGIC_PREFIX[: len(payload)]):
            raise _checkpoint_error(
                DexErrorCode.CHECKPOINT_FORMAT, "not a checkpoint file.", path=str(path)
            )
        raise _checkpoint_error(
            DexErrorCode.CHECKPOINT_TRUNCATED,
            "checkpoint header is truncated.",
            path=str(path),
            size=len(payload),
        )

    magic, manifest_length = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        if magic.startswith(MAGIC_PREFIX):
            raise _checkpoint_error(
                DexErrorCode.CHECKPOINT_VERSION,
                "unsupported checkpoint version.",
                magic=magic.decode("latin-1"),
            )
        raise _checkpoint_error(
            DexErrorCode.CHECKPOINT_FORMAT,
            "bad checkpoint magic.",
            magic=magic.decode("latin-1"),
        )

    body_start = _HEADER.size + manifest_length
    if body_start > len(payload):
        raise _checkpoint_error(
            DexErrorCode.CHECKPOINT_TRUNCATED,
            "checkpoint manifest is truncated.",
            manifest_length=manifest_length,
            size=len(payload),
        )
    try:
        manifest = json.loads(payload[_HEADER.size : body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise _checkpoint_error(
            DexErrorCode.CHECKPOINT_FORMAT, "checkpoint manifest is not valid JSON."
        ) from exc

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise _checkpoint_error(
            DexErrorCode.CHECKPOINT_VERSION,
            "unsupported checkpoint version.",
            version=version,
        )

    body = memoryview(payload)[body_start:]
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest.get("arrays", []):
        start = int(entry["offset"])
        end = start + int(entry["nbytes"])
        if end > len(body):
            raise _checkpoint_error(
                DexErrorCode.CHECKPOINT_TRUNCATED,
                "checkpoint array data is truncated.",
                name=entry["name"],
                end=end,
                available=len(body),
            )
        try:
            dtype = np.dtype(entry["dtype"])
            values = np.frombuffer(body[start:end], dtype=dtype).reshape(entry["shape"])
        except (TypeError, ValueError) as exc:
            raise _checkpoint_error(
                DexErrorCode.CHECKPOINT_SHAPE,
                "checkpoint array does not match its manifest entry.",
                name=entry["name"],
                shape=entry["shape"],
                dtype=entry["dtype"],
                nbytes=entry["nbytes"],
            ) from exc
        arrays[entry["name"]] = values.astype(dtype.newbyteorder("="), copy=True)

    return CheckpointData(
        version=version,
        step=int(manifest.get("step", 0)),
        config=manifest.get("config", {}),
        arrays=arrays,
        rng_states=manifest.get("rng_states", {}),
        optimizer_step=int(manifest.get("optimizer_step", 0)),
    )


def _assign(name: str, target: np.ndarray, source: np.ndarray | None) -> None:
    if source is None:
        raise _checkpoint_error(
            DexErrorCode.CHECKPOINT_SHAPE, "checkpoint is missing an array.", name=name
        )
    if source.shape != target.shape or source.dtype != target.dtype:
        raise _checkpoint_error(
            DexErrorCode.CHECKPOINT_SHAPE,
            "checkpoint array does not match the network.",
            name=name,
            expected_shape=list(target.shape),
            found_shape=list(source.shape),
            expected_dtype=str(target.dtype),
            found_dtype=str(source.dtype),
        )
    target[...] = source


def apply_checkpoint(
    data: CheckpointData,
    network: Module,
    optimizer: AdamW | None = None,
) -> None:
    """把检查点数组原地写回网络（以及可选的优化器）。"""
    for name, tensor in network.named_parameters():
        _assign(name, tensor.data, data.arrays.get(PARAM_PREFIX + name))
    for name, buffer in network.named_buffers():
        _assign(name, buffer, data.arrays.get(BUFFER_PREFIX + name))
    if optimizer is not None:
        for name, value in optimizer.first_moments.items():
            _assign(name, value, data.arrays.get(FIRST_MOMENT_PREFIX + name))
        for name, value in optimizer.second_moments.items():
            _assign(name, value, data.arrays.get(SECOND_MOMENT_PREFIX + name))
        optimizer.step_count = data.optimizer_step


def load_checkpoint(
    path: Path,
    network: Module,
    optimizer: AdamW | None = None,
) -> CheckpointData:
    data = read_checkpoint(path)
    apply_checkpoint(data, network, optimizer)
    logger.info(
        "checkpoint.load",
        {"path": str(path), "step": data.step, "arrays": len(data.arrays)},
    )
    return data


def restore_rng(state: dict[str, Any]) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng
