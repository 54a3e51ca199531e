from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from fractions import Fraction

from powpos_lab.chain.params import ChainParams
from powpos_lab.hashing import MAX_TARGET


def retarget(old_target: int, actual_timespan: int | Fraction, params: ChainParams) -> int:
    """Scale `old_target` by the observed/expected timespan ratio.

    The ratio is clamped to [1/max_retarget_factor, max_retarget_factor] and the
    result to [1, MAX_TARGET]. A lower target means a higher difficulty.
    """
    actual = Fraction(actual_timespan)
    if actual <= 0:
        raise ValueError(f"actual_timespan must be positive, got {actual_timespan}")
    expected = params.retarget_interval * params.target_block_time
    factor = Fraction(params.max_retarget_factor)
    actual = min(max(actual, expected / factor), expected * factor)
    new_target = math.floor(old_target * actual / expected)
    return min(max(1, new_target), MAX_TARGET)


def is_retarget_height(height: int, params: ChainParams) -> bool:
    return height > 0 and height % params.retarget_interval == 0


def initial_target(hashpower: float, params: ChainParams) -> int:
    """Target at which `hashpower` finds a block every target_block_time on average."""
    if hashpower <= 0:
        raise ValueError("hashpower must be positive")
    expected_hashes = max(1, round(params.target_block_time * hashpower))
    return min(max(1, (1 << 256) // expected_hashes), MAX_TARGET)


@dataclass(frozen=True, slots=True)
class DifficultyState:
    """Target in force after a block, and the timestamp of its retarget boundary."""

    target: int
    boundary_timestamp: int
    params: ChainParams

    def __post_init__(self) -> None:
        if not 1 <= self.target <= MAX_TARGET:
            raise ValueError(f"target {self.target} outside [1, MAX_TARGET]")

    def for_child(
        self, child_height: int, timestamp_at: Callable[[int], int]
    ) -> DifficultyState:
        """State for the block at `child_height`.

        `timestamp_at(h)` returns the timestamp of the ancestor at height h. The
        measured span runs from the block one interval before the parent to the
        parent, and is scaled up when the chain is younger than one interval.
        """
        if not is_retarget_height(child_height, self.params):
            return self
        last = child_height - 1
        first = max(0, last - self.params.retarget_interval)
        gaps = last - first
        if gaps == 0:
            return self
        last_ts = timestamp_at(last)
        span = Fraction(max(1, last_ts - timestamp_at(first)) * self.params.retarget_interval, gaps)
        return DifficultyState(retarget(self.target, span, self.params), last_ts, self.params)
