from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Literal

import numpy as np
from PIL import Image

from ..utils.io import save_csv
from ..utils.log import logger
from .schema import Sample

ImageFormat = Literal["png", "pgm"]

LABELS_FILENAME = "labels.csv"
LABEL_COLUMNS = (
    "index",
    "file",
    "modality_id",
    "semantic_id",
    "center_x",
    "center_y",
    "scale",
)

_PIL_FORMATS: dict[str, str] = {"png": "PNG", "pgm": "PPM"}


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def export_samples(
    samples: Sequence[Sample],
    out_dir: Path,
    fmt: ImageFormat = "png",
) -> list[Path]:
    """逐张写出灰度图，并写出 labels.csv。"""
    normalized = fmt.strip().lower()
    if normalized not in _PIL_FORMATS:
        raise ValueError(f"Unsupported image format: {fmt}")
    out_dir.mkdir(parents=True, exist_ok=True)

    paths: list[Path] = []
    rows: list[list[object]] = []
    for index, sample in enumerate(samples):
        filename = f"sample_{index:05d}.{normalized}"
        path = out_dir / filename
        Image.fromarray(to_uint8(sample.image)).save(
            path, format=_PIL_FORMATS[normalized]
        )
        paths.append(path)
        rows.append(
            [
                index,
                filename,
                sample.modality_id,
                sample.semantic_id,
                f"{sample.center_x:.4f}",
                f"{sample.center_y:.4f}",
                f"{sample.scale:.4f}",
            ]
        )

    save_csv(out_dir / LABELS_FILENAME, LABEL_COLUMNS, rows)
    logger.info(
        "synthgen.export",
        {"out_dir": str(out_dir), "count": len(paths), "format": normalized},
    )
    return paths
