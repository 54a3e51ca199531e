from powpos_lab.pow.difficulty import (
    DifficultyState,
    initial_target,
    is_retarget_height,
    retarget,
)
from powpos_lab.pow.mining import (
    MiningBackend,
    RealBackend,
    StochasticBackend,
    mine_real,
    sample_block_time,
)

__all__ = [
    "DifficultyState",
    "MiningBackend",
    "RealBackend",
    "StochasticBackend",
    "initial_target",
    "is_retarget_height",
    "mine_real",
    "retarget",
    "sample_block_time",
]
