from __future__ import annotations

import bisect

from powpos_lab.hashing import HashAlgo, digest, shake_stream
from powpos_lab.pos.pool import StakePool

SORTITION_TAG = b"SORT"
DRAW_BYTES = 8


class PoolTooSmallError(RuntimeError):
    def __init__(self, live: int, required: int):
        super().__init__(f"Stake pool has {live} live entries, {required} required")
        self.live = live
        self.required = required


def sortition_seed(algo: HashAlgo, parent_hash: bytes, height: int) -> bytes:
    """Seed for choosing the voters of the candidate at `height` on `parent_hash`."""
    return digest(algo, parent_hash + height.to_bytes(8, "big") + SORTITION_TAG)


def select_voters(pool: StakePool, seed: bytes, m: int) -> tuple[str, ...]:
    """Stake-weighted sampling of `m` distinct live entries, without replacement.

    Each 64-bit draw from the SHAKE-256 stream is reduced modulo the remaining
    weight and mapped onto the cumulative-weight line of the entries not yet
    chosen (entries ordered by id).
    """
    entries = pool.live_entries
    if len(entries) < m:
        raise PoolTooSmallError(len(entries), m)

    cumulative = pool.cumulative_weights
    stream = shake_stream(seed, DRAW_BYTES * m)
    remaining = cumulative[-1] if cumulative else 0
    removed: list[tuple[int, int]] = []
    chosen: list[str] = []

    for i in range(m):
        draw = int.from_bytes(stream[i * DRAW_BYTES : (i + 1) * DRAW_BYTES], "big")
        x = draw % remaining
        # Skip over the segments of entries already chosen
        for start, weight in removed:
            if x < start:
                break
            x += weight
        idx = bisect.bisect_right(cumulative, x)
        entry = entries[idx]
        bisect.insort(removed, (cumulative[idx] - entry.amount, entry.amount))
        remaining -= entry.amount
        chosen.append(entry.id)

    return tuple(chosen)
