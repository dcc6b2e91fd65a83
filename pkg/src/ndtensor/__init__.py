from . import ops
from .init import resolve_dtype
from .module import Module
from .tensor import Tape, TapeNode, Tensor, backward

__all__ = [
    "Module",
    "Tape",
    "TapeNode",
    "Tensor",
    "backward",
    "ops",
    "resolve_dtype",
]
