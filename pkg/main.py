from __future__ import annotations

import sys
from pathlib import Path

from dotenv import load_dotenv

ROOT = Path(__file__).resolve().parent


if __name__ == "__main__":
    load_dotenv(ROOT / ".env", override=False)
    if str(ROOT) not in sys.path:
        sys.path.insert(0, str(ROOT))

    # DEX_THREADS 限制 BLAS 线程数；必须在 numpy 导入之前设置
    from src.utils.threads import limit_threads

    limit_threads()

    from src.cli import main

    sys.exit(main())
