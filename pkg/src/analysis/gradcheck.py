"""中心差分梯度校验：噪声置零、路由与 director 输出固定，在损失的光滑分段内比对解析梯度。"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..backbone import DexNetwork, ForwardResult, LossWeights, MaskInfo, sample_mask
from ..ndtensor import Tensor, backward
from ..utils.errors import DexErrorCode, DexException
from ..utils.log import logger

DEFAULT_STEP = 1e-4
MEDIAN_TOL = 1e-6
MAX_TOL = 1e-4
MIN_COORDINATES = 200
REL_FLOOR = 1e-6
"""解析与数值梯度都低于此量级时，相对误差退化为绝对误差 / REL_FLOOR"""
STENCIL_OFFSETS = (-2, -1, 1, 2)


@dataclass(slots=True)
class GradcheckReport:
    checked: int
    median_rel_error: float
    max_rel_error: float
    worst_param: str
    groups: list[str]
    director_max_abs_grad: float
    median_tol: float = MEDIAN_TOL
    max_tol: float = MAX_TOL
    errors: dict[str, float] = field(default_factory=dict, repr=False)
    """按参数名聚合的最大相对误差"""

    @property
    def passed(self) -> bool:
        return (
            self.director_max_abs_grad == 0.0
            and self.median_rel_error < self.median_tol
            and self.max_rel_error < self.max_tol
        )

    def to_dict(self) -> dict[str, object]:
        return {
            "passed": self.passed,
            "checked": self.checked,
            "median_rel_error": self.median_rel_error,
            "max_rel_error": self.max_rel_error,
            "median_tol": self.median_tol,
            "max_tol": self.max_tol,
            "worst_param": self.worst_param,
            "director_max_abs_grad": self.director_max_abs_grad,
            "groups": self.groups,
        }


def parameter_group(name: str) -> str:
    """blocks.0.pool.experts.3.fc1.weight → blocks.0.pool；decoder.* → decoder。"""
    parts = name.split(".")
    if parts[0] == "blocks" and len(parts) > 2:
        return ".".join(parts[:3])
    return parts[0]


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), REL_FLOOR)


def central_difference(values: dict[int, float], step: float) -> float:
    """五点中心差分 (−f₂ + 8f₁ − 8f₋₁ + f₋₂) / 12h，截断误差 O(h⁴)。"""
    return (-values[2] + 8.0 * values[1] - 8.0 * values[-1] + values[-2]) / (12.0 * step)


def _director_max_abs_grad(network: DexNetwork) -> float:
    worst = 0.0
    for block in network.blocks:
        for _, tensor in block.director.named_parameters():
            if tensor.grad is not None:
                worst = max(worst, float(np.max(np.abs(tensor.grad))))
    return worst


def _choose_coordinates(
    params: list[tuple[str, Tensor]],
    count: int,
    rng: np.random.Generator,
) -> list[tuple[int, int]]:
    """每个参数张量至少一个坐标，其余按参数总量均匀抽取。"""
    chosen: set[tuple[int, int]] = set()
    for position, (_, tensor) in enumerate(params):
        chosen.add((position, int(rng.integers(tensor.data.size))))
    sizes = np.asarray([tensor.data.size for _, tensor in params], dtype=np.float64)
    total = int(sizes.sum())
    target = min(max(count, len(chosen)), total)
    while len(chosen) < target:
        position = int(rng.choice(len(params), p=sizes / sizes.sum()))
        chosen.add((position, int(rng.integers(params[position][1].data.size))))
    return sorted(chosen)


def gradcheck(
    network: DexNetwork,
    images: np.ndarray,
    *,
    weights: LossWeights,
    rng: np.random.Generator,
    num_params: int = MIN_COORDINATES,
    step: float = DEFAULT_STEP,
    mask: MaskInfo | None = None,
) -> GradcheckReport:
    """director 任一解析梯度非零时直接报 CHECK_FAILED。"""
    if network.dtype != np.float64:
        raise DexException(
            code=DexErrorCode.CONTRACT_ERROR,
            message="gradcheck requires a float64 network.",
            detail={"dtype": str(network.dtype)},
        )
    images = images.astype(np.float64)
    saved_sigma = [block.gate.sigma for block in network.blocks]
    network.set_sigma(0.0)
    try:
        if mask is None:
            mask = sample_mask(
                images.shape[0], network.config.num_patches, network.config.mask_ratio, rng
            )

        def evaluate(
            pinned: list[np.ndarray] | None,
            frozen: list[np.ndarray] | None = None,
        ) -> ForwardResult:
            return network.forward(
                images,
                weights=weights,
                training=True,
                rng=np.random.default_rng(0),
                mask=mask,
                pinned=pinned,
                director_targets=frozen,
            )

        # 基准前向：固定路由与 director 输出，扰动时二者都不随参数变化
        reference = evaluate(None)
        pinned = reference.routing_indices
        frozen = reference.director_targets
        network.zero_grad()
        backward(evaluate(pinned).loss_total)

        director_grad = _director_max_abs_grad(network)
        if director_grad != 0.0:
            raise DexException(
                code=DexErrorCode.CHECK_FAILED,
                message="director parameters received a gradient.",
                detail={"director_max_abs_grad": director_grad},
            )

        params = [
            (name, tensor)
            for name, tensor in network.named_parameters()
            if tensor.requires_grad
        ]
        analytic = {
            name: (tensor.grad.copy() if tensor.grad is not None else np.zeros_like(tensor.data))
            for name, tensor in params
        }

        errors: list[float] = []
        per_param: dict[str, float] = {}
        for position, flat_index in _choose_coordinates(params, num_params, rng):
            name, tensor = params[position]
            flat = tensor.data.reshape(-1)
            original = flat[flat_index]
            values: dict[int, float] = {}
            for offset in STENCIL_OFFSETS:
                flat[flat_index] = original + offset * step
                values[offset] = evaluate(pinned, frozen).loss_total.item()
            flat[flat_index] = original

            numeric = central_difference(values, step)
            error = relative_error(float(analytic[name].reshape(-1)[flat_index]), numeric)
            errors.append(error)
            per_param[name] = max(per_param.get(name, 0.0), error)
    finally:
        for block, sigma in zip(network.blocks, saved_sigma):
            block.gate.sigma = sigma
        network.zero_grad()

    values = np.asarray(errors)
    worst = max(per_param, key=per_param.__getitem__)
    report = GradcheckReport(
        checked=len(errors),
        median_rel_error=float(np.median(values)),
        max_rel_error=float(values.max()),
        worst_param=worst,
        groups=sorted({parameter_group(name) for name in per_param}),
        director_max_abs_grad=director_grad,
        errors=per_param,
    )
    logger.info("gradcheck.report", report.to_dict())
    return report
