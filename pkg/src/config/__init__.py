from .loader import (
    apply_overrides,
    build_run_config,
    describe_defaults,
    parse_override,
    read_run_config,
)
from .presets import PRESETS, preset_overrides
from .schema import RunConfig

__all__ = [
    "PRESETS",
    "RunConfig",
    "apply_overrides",
    "build_run_config",
    "describe_defaults",
    "parse_override",
    "preset_overrides",
    "read_run_config",
]
