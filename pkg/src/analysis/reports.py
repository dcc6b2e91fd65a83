from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Any

from ..backbone import DexNetwork, NetworkConfig
from ..synthgen import ModalityMixture
from ..utils.io import save_csv, save_json
from ..utils.log import logger
from .flops import count_routing_flops, overhead_sweep
from .histograms import activation_histograms, mean_pairwise_js, write_histogram_csv
from .probe import collect_probe_features, linear_probe

FLOP_TOKEN_COUNTS = (64, 256, 1024)
SWEEP_IMAGE_SIZES = (32, 64, 128, 224)
SWEEP_BATCH_SIZES = (1, 64, 256)


def write_json_report(path: Path, payload: dict[str, Any]) -> Path:
    save_json(path, payload)
    logger.info("analysis.report", {"path": str(path), "keys": list(payload)})
    return path


def flops_report(
    config: NetworkConfig,
    out_dir: Path,
    *,
    batch: int = 64,
    token_counts: Sequence[int] = FLOP_TOKEN_COUNTS,
) -> dict[str, Any]:
    """门控计算量随 N 的变化，以及相对普通 ViT 的开销扫描。"""
    routing = []
    for tokens in token_counts:
        image = count_routing_flops(
            tokens, config.embed_dim, config.num_experts, batch, "image", top_k=config.top_k
        )
        token = count_routing_flops(
            tokens, config.embed_dim, config.num_experts, batch, "token", top_k=config.top_k
        )
        routing.append(
            {
                "image_wise": image.to_dict(),
                "token_wise": token.to_dict(),
                "projection_ratio": token.gate_projection // image.gate_projection,
            }
        )
    sweep = overhead_sweep(config, SWEEP_IMAGE_SIZES, SWEEP_BATCH_SIZES)
    payload = {"routing": routing, "overhead_sweep": sweep}
    write_json_report(out_dir / "flops.json", payload)
    if sweep:
        save_csv(
            out_dir / "flops_sweep.csv",
            list(sweep[0]),
            [list(row.values()) for row in sweep],
        )
    return payload


def histogram_report(
    network: DexNetwork,
    mix: ModalityMixture,
    out_dir: Path,
    *,
    n_samples: int = 1024,
    seed: int = 0,
) -> dict[str, Any]:
    histograms = activation_histograms(network, mix, n_samples, seed=seed)
    write_histogram_csv(out_dir / "histograms.csv", histograms)
    payload = {
        "n_samples": n_samples,
        "layers": [
            {
                "layer": histogram.layer,
                "mean_pairwise_js": mean_pairwise_js(histogram),
                "counts": {str(key): value for key, value in sorted(histogram.counts.items())},
            }
            for histogram in histograms
        ],
    }
    write_json_report(out_dir / "histograms.json", payload)
    return payload


def probe_report(
    network: DexNetwork,
    mix: ModalityMixture,
    out_dir: Path,
    *,
    n_samples: int = 1024,
    l2_reg: float = 1e-3,
    seed: int = 0,
) -> dict[str, Any]:
    """语义（形状）与模态两个方向的线性探针准确率。"""
    dataset = collect_probe_features(network, mix, n_samples, seed=seed)
    payload: dict[str, Any] = {
        "n_samples": n_samples,
        "semantic": linear_probe(dataset.features, dataset.semantic_ids, l2_reg, seed=seed).to_dict(),
        "semantic_chance": 1.0 / mix.num_classes,
    }
    if mix.num_modalities > 1:
        payload["modality"] = linear_probe(
            dataset.features, dataset.modality_ids, l2_reg, seed=seed
        ).to_dict()
        payload["modality_chance"] = 1.0 / mix.num_modalities
    write_json_report(out_dir / "probe.json", payload)
    return payload
