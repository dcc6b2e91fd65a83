"""BLAS 线程数限制；只依赖标准库，须在 numpy 首次导入前调用。"""

from __future__ import annotations

import os
from collections.abc import MutableMapping

THREADS_ENV = "DEX_THREADS"
DEFAULT_THREADS = "1"
THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def limit_threads(environ: MutableMapping[str, str] | None = None) -> str:
    """显式设置 DEX_THREADS 时覆盖各 BLAS 变量；未设置时只补默认值 1。返回生效的线程数。"""
    env = os.environ if environ is None else environ
    requested = env.get(THREADS_ENV, "").strip()
    if requested:
        for name in THREAD_ENV_VARS:
            env[name] = requested
        return requested
    for name in THREAD_ENV_VARS:
        env.setdefault(name, DEFAULT_THREADS)
    return env[THREAD_ENV_VARS[0]]
