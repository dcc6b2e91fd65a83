from .app import (
    EXIT_CHECK_FAILED,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    build_parser,
    exit_code_for,
    main,
)

__all__ = [
    "EXIT_CHECK_FAILED",
    "EXIT_NUMERIC",
    "EXIT_OK",
    "EXIT_USAGE",
    "build_parser",
    "exit_code_for",
    "main",
]
