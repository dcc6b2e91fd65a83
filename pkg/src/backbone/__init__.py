from .embed import patch_embed, patchify, sincos_2d, unpatchify
from .losses import total_loss
from .masking import MaskInfo, apply_mask, mask_tokens, sample_mask
from .network import (
    DexNetwork,
    EncoderOutput,
    ForwardResult,
    LayerRecord,
    MaeDecoder,
    decode_and_reconstruct,
    encode,
)
from .schema import LossWeights, NetworkConfig, layer_factors

__all__ = [
    "DexNetwork",
    "EncoderOutput",
    "ForwardResult",
    "LayerRecord",
    "LossWeights",
    "MaeDecoder",
    "MaskInfo",
    "NetworkConfig",
    "apply_mask",
    "decode_and_reconstruct",
    "encode",
    "layer_factors",
    "mask_tokens",
    "patch_embed",
    "patchify",
    "sample_mask",
    "sincos_2d",
    "total_loss",
    "unpatchify",
]
