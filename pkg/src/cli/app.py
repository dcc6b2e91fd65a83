"""命令行入口：pretrain / gradcheck / analyze / gen-samples。"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence

from ..config import PRESETS, describe_defaults
from ..utils.errors import DexErrorCode, DexException
from ..utils.log import logger
from .commands import cmd_analyze, cmd_gen_samples, cmd_gradcheck, cmd_pretrain

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

Command = Callable[[argparse.Namespace], int]


def exit_code_for(exc: DexException) -> int:
    if exc.code is DexErrorCode.CHECK_FAILED:
        return EXIT_CHECK_FAILED
    if exc.code in {DexErrorCode.NUMERIC_ERROR, DexErrorCode.DEGENERATE_INPUT}:
        return EXIT_NUMERIC
    return EXIT_USAGE


def _add_config_options(parser: argparse.ArgumentParser, *, required: bool = False) -> None:
    parser.add_argument("--config", required=required, help="JSON 配置文件路径")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="点分键覆盖，例如 train.seed=7（可重复）",
    )


def build_parser() -> argparse.ArgumentParser:
    defaults = {
        "epilog": "config keys and defaults:\n" + describe_defaults(),
        "formatter_class": argparse.RawDescriptionHelpFormatter,
    }
    parser = argparse.ArgumentParser(
        prog="dex",
        description="Director–Experts modular network: pretraining and analysis.",
        **defaults,
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="日志级别",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    pretrain = subparsers.add_parser(
        "pretrain", help="run masked-reconstruction pretraining", **defaults
    )
    _add_config_options(pretrain, required=True)
    pretrain.add_argument("--preset", choices=sorted(PRESETS), help="消融预设")
    pretrain.add_argument("--resume", default=None, help="从检查点续训")
    pretrain.set_defaults(handler=cmd_pretrain)

    check = subparsers.add_parser(
        "gradcheck", help="finite-difference gradient check at 64-bit", **defaults
    )
    _add_config_options(check, required=True)
    check.add_argument("--params", type=int, default=200, help="抽查的参数坐标数")
    check.set_defaults(handler=cmd_gradcheck)

    analyze = subparsers.add_parser("analyze", help="emit analysis reports for a checkpoint")
    analyze.add_argument("--checkpoint", required=True, help="检查点路径")
    analyze.add_argument(
        "--what", required=True, choices=["histograms", "flops", "probe"], help="报告类型"
    )
    analyze.add_argument("--out", default=None, help="输出目录，默认 <output_dir>/analysis")
    analyze.add_argument("--samples", type=int, default=1024, help="统计用样本数")
    analyze.add_argument("--seed", type=int, default=0, help="统计样本的随机种子")
    analyze.set_defaults(handler=cmd_analyze)

    samples = subparsers.add_parser(
        "gen-samples", help="write synthetic sample images and labels", **defaults
    )
    _add_config_options(samples, required=True)
    samples.add_argument("--out", required=True, help="输出目录")
    samples.add_argument("-n", dest="count", type=int, default=16, help="样本数")
    samples.add_argument("--format", choices=["png", "pgm"], default="png", help="图像格式")
    samples.set_defaults(handler=cmd_gen_samples)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    logger.info("cli.command", {"command": args.command})
    handler: Command = args.handler
    try:
        return handler(args)
    except DexException as exc:
        code = exit_code_for(exc)
        logger.error("cli.failed", {"command": args.command, "exit_code": code, **exc.to_dict()})
        print(str(exc), file=sys.stderr)
        return code
