from __future__ import annotations

import math
from dataclasses import dataclass

from powpos_lab.chain.params import ChainParams


class RewardError(ValueError):
    def __init__(self, votes: int, params: ChainParams):
        super().__init__(
            f"{votes} votes outside [{params.n_quorum}, {params.m_voters}]"
        )
        self.votes = votes


@dataclass(frozen=True, slots=True)
class RewardSplit:
    """How one block subsidy is paid out.

    `burned` (missing voters' shares and rounding dust) is minted and destroyed;
    `withheld` (the miner's cut for missing votes) is never minted at all.
    """

    miner: int
    per_voter: int
    dev: int
    burned: int
    withheld: int = 0

    def total(self, votes: int) -> int:
        return self.miner + votes * self.per_voter + self.dev + self.burned + self.withheld


def distribute_reward(reward: int, votes: int, params: ChainParams) -> RewardSplit:
    if not params.n_quorum <= votes <= params.m_voters:
        raise RewardError(votes, params)
    if reward < 0:
        raise ValueError("reward must be >= 0")
    m = params.m_voters
    miner_full = math.floor(reward * params.split_miner)
    miner = math.floor(reward * params.split_miner * votes / m)
    per_voter = math.floor(reward * params.split_voters / m)
    dev = math.floor(reward * params.split_dev)
    withheld = miner_full - miner
    burned = reward - miner_full - votes * per_voter - dev
    return RewardSplit(miner, per_voter, dev, burned, withheld)
