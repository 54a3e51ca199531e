from powpos_lab.pos.pool import StakePool, advance_pool, window_width
from powpos_lab.pos.sortition import (
    PoolTooSmallError,
    select_voters,
    sortition_seed,
)
from powpos_lab.pos.voting import Ballot, cast_votes

__all__ = [
    "StakePool",
    "advance_pool",
    "window_width",
    "PoolTooSmallError",
    "select_voters",
    "sortition_seed",
    "Ballot",
    "cast_votes",
]
