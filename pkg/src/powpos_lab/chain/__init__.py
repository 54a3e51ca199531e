from powpos_lab.chain.params import (
    COIN,
    ChainParams,
    ParamsError,
    Preset,
    block_reward_at,
    coins,
    format_coins,
    preset_params,
)
from powpos_lab.chain.types import (
    Block,
    BlockHeader,
    Coinbase,
    StakeEntry,
    StakeStatus,
    StakeTransitionError,
    Transaction,
    TxKind,
    Vote,
)

__all__ = [
    "COIN",
    "ChainParams",
    "ParamsError",
    "Preset",
    "block_reward_at",
    "coins",
    "format_coins",
    "preset_params",
    "Block",
    "BlockHeader",
    "Coinbase",
    "StakeEntry",
    "StakeStatus",
    "StakeTransitionError",
    "Transaction",
    "TxKind",
    "Vote",
]
