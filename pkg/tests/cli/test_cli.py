from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest
from src.analysis import GradcheckReport
from src.cli import EXIT_CHECK_FAILED, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, exit_code_for, main
from src.trainengine import read_metrics
from src.utils.errors import DexErrorCode, DexException
from src.utils.paths import CONFIG_DIR

TINY_CONFIG = str(CONFIG_DIR / "tiny.json")


def _tiny_args(out_dir: Path, *extra: str) -> list[str]:
    return [
        "--config",
        TINY_CONFIG,
        "--set",
        f"output_dir={out_dir}",
        "--set",
        "train.steps=3",
        *extra,
    ]


@pytest.mark.parametrize(
    ("code", "expected"),
    [
        (DexErrorCode.CHECK_FAILED, EXIT_CHECK_FAILED),
        (DexErrorCode.NUMERIC_ERROR, EXIT_NUMERIC),
        (DexErrorCode.DEGENERATE_INPUT, EXIT_NUMERIC),
        (DexErrorCode.CONFIG_ERROR, EXIT_USAGE),
        (DexErrorCode.CHECKPOINT_TRUNCATED, EXIT_USAGE),
        (DexErrorCode.DIMENSION_ERROR, EXIT_USAGE),
    ],
)
def test_exit_code_mapping(code: DexErrorCode, expected: int) -> None:
    """验证：错误码到退出码的映射。"""
    assert exit_code_for(DexException(code=code, message="x")) == expected


def test_usage_errors_exit_2() -> None:
    """验证：缺少子命令或必填参数时退出码为 2。"""
    assert main([]) == EXIT_USAGE
    assert main(["pretrain"]) == EXIT_USAGE


def test_missing_or_invalid_config_exits_2(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    """验证：配置文件不存在或键未知时退出码为 2，并在 stderr 输出错误码。"""
    assert main(["pretrain", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert "[CONFIG_ERROR]" in capsys.readouterr().err
    assert main(["pretrain", *_tiny_args(tmp_path, "--set", "train.bogus=1")]) == EXIT_USAGE


def test_pretrain_writes_metrics_checkpoint_and_snapshot(tmp_path: Path) -> None:
    """验证：pretrain 在输出目录写出指标、最终检查点与配置快照。"""
    out_dir = tmp_path / "run"

    assert main(["pretrain", *_tiny_args(out_dir)]) == EXIT_OK

    assert len(read_metrics(out_dir / "metrics.jsonl")) == 3
    assert (out_dir / "final.ckpt").is_file()
    snapshot = json.loads((out_dir / "config.json").read_text(encoding="utf-8"))
    assert snapshot["train"]["steps"] == 3
    assert snapshot["output_dir"] == str(out_dir)


def test_pretrain_is_idempotent(tmp_path: Path) -> None:
    """验证：相同输入与种子重复运行得到逐字节相同的指标与检查点。"""
    first, second = tmp_path / "a", tmp_path / "b"

    assert main(["pretrain", *_tiny_args(first)]) == EXIT_OK
    assert main(["pretrain", *_tiny_args(second)]) == EXIT_OK

    assert (first / "metrics.jsonl").read_bytes() == (second / "metrics.jsonl").read_bytes()


def test_pretrain_resume_appends_metrics(tmp_path: Path) -> None:
    """验证：--resume 从检查点续训，指标追加到已有文件。"""
    out_dir = tmp_path / "run"
    assert main(["pretrain", *_tiny_args(out_dir)]) == EXIT_OK
    checkpoint = tmp_path / "half.ckpt"
    (out_dir / "final.ckpt").rename(checkpoint)

    code = main(
        ["pretrain", *_tiny_args(out_dir, "--set", "train.steps=5", "--resume", str(checkpoint))]
    )

    assert code == EXIT_OK
    assert [row["step"] for row in read_metrics(out_dir / "metrics.jsonl")] == [0, 1, 2, 3, 4]


def test_numeric_abort_exits_3(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """验证：训练中的数值错误以退出码 3 结束。"""

    def _abort(self: object, *args: object, **kwargs: object) -> None:
        raise DexException(code=DexErrorCode.NUMERIC_ERROR, message="loss is not finite.")

    monkeypatch.setattr("src.cli.commands.Trainer.run", _abort)

    assert main(["pretrain", *_tiny_args(tmp_path)]) == EXIT_NUMERIC


def test_gradcheck_passes_on_tiny_config(tmp_path: Path) -> None:
    """验证：tiny 配置上梯度校验通过并写出报告。"""
    assert main(["gradcheck", *_tiny_args(tmp_path), "--params", "60"]) == EXIT_OK

    report = json.loads((tmp_path / "gradcheck.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert report["director_max_abs_grad"] == 0.0


def test_gradcheck_tolerance_breach_exits_1(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    """验证：相对误差超限时退出码为 1。"""
    failing = GradcheckReport(
        checked=1,
        median_rel_error=1e-2,
        max_rel_error=1e-1,
        worst_param="patch_proj.weight",
        groups=["patch_proj"],
        director_max_abs_grad=0.0,
    )
    monkeypatch.setattr("src.cli.commands.gradcheck", lambda *args, **kwargs: failing)

    assert main(["gradcheck", *_tiny_args(tmp_path)]) == EXIT_CHECK_FAILED
    assert json.loads((tmp_path / "gradcheck.json").read_text(encoding="utf-8"))["passed"] is False


def test_gen_samples_writes_images_and_labels(tmp_path: Path) -> None:
    """验证：gen-samples -n 16 写出 16 张图与对应标签。"""
    out_dir = tmp_path / "samples"

    code = main(["gen-samples", "--config", TINY_CONFIG, "--out", str(out_dir), "-n", "16"])

    assert code == EXIT_OK
    assert len(list(out_dir.glob("sample_*.png"))) == 16
    with (out_dir / "labels.csv").open(encoding="utf-8") as handle:
        assert len(list(csv.reader(handle))) == 17
    assert main(["gen-samples", "--config", TINY_CONFIG, "--out", str(out_dir), "-n", "0"]) == EXIT_USAGE


def test_analyze_reports_from_checkpoint(tmp_path: Path) -> None:
    """验证：analyze 从检查点重建网络，写出计算量、直方图与探针报告。"""
    out_dir = tmp_path / "run"
    assert main(["pretrain", *_tiny_args(out_dir)]) == EXIT_OK
    checkpoint = str(out_dir / "final.ckpt")

    assert main(["analyze", "--checkpoint", checkpoint, "--what", "flops"]) == EXIT_OK
    assert main(["analyze", "--checkpoint", checkpoint, "--what", "histograms", "--samples", "64"]) == EXIT_OK
    assert main(["analyze", "--checkpoint", checkpoint, "--what", "probe", "--samples", "200"]) == EXIT_OK

    analysis = out_dir / "analysis"
    assert {path.name for path in analysis.iterdir()} >= {
        "flops.json",
        "flops_sweep.csv",
        "histograms.csv",
        "histograms.json",
        "probe.json",
    }


def test_analyze_rejects_corrupt_checkpoint(tmp_path: Path) -> None:
    """验证：检查点损坏时 analyze 退出码为 2。"""
    bogus = tmp_path / "bogus.ckpt"
    bogus.write_bytes(b"NOTACKPT" + b"\x00" * 32)

    assert main(["analyze", "--checkpoint", str(bogus), "--what", "flops"]) == EXIT_USAGE
    assert main(["analyze", "--checkpoint", str(tmp_path / "none.ckpt"), "--what", "flops"]) == EXIT_USAGE
