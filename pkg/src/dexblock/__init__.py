from .block import BlockOutput, DexBlock, apply_block_updates, dex_block_forward
from .experts import (
    contribution_weights,
    director_forward,
    expert_forward,
    gema_update,
)
from .gate import (
    gate_scores,
    global_feature,
    select_top_k,
    token_wise_gate_scores,
    update_frequency_ema,
)
from .losses import alignment_loss, balance_loss
from .schema import Director, ExpertPool, GateState, RoutingDecision

__all__ = [
    "BlockOutput",
    "DexBlock",
    "Director",
    "ExpertPool",
    "GateState",
    "RoutingDecision",
    "alignment_loss",
    "apply_block_updates",
    "balance_loss",
    "contribution_weights",
    "dex_block_forward",
    "director_forward",
    "expert_forward",
    "gate_scores",
    "gema_update",
    "global_feature",
    "select_top_k",
    "token_wise_gate_scores",
    "update_frequency_ema",
]
