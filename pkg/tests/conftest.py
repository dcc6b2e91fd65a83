from __future__ import annotations

import sys
from pathlib import Path

from dotenv import load_dotenv

repo_root = Path(__file__).resolve().parents[1]
if str(repo_root) not in sys.path:
    # 仓库根目录放到导入路径最前面，测试直接 `from src.<pkg> import ...`
    sys.path.insert(0, str(repo_root))

load_dotenv(repo_root / ".env", override=False)

# 单线程 BLAS，逐字节复现依赖于此；须在 numpy 首次导入前设置
from src.utils.threads import limit_threads  # noqa: E402

limit_threads()


def pytest_configure(config) -> None:
    """测试时开启 debug 日志输出。"""
    config.option.log_cli = True
    config.option.log_cli_level = "DEBUG"
