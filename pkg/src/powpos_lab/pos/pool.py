from __future__ import annotations

import bisect
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import accumulate

from powpos_lab.chain.params import ChainParams
from powpos_lab.chain.types import StakeEntry, StakeStatus


def window_width(live_count: int, params: ChainParams) -> int:
    """Eligibility window W for an entry joining a pool of `live_count` live entries.

    W = ceil(alpha * N_live / m), the same for every entry whatever its amount:
    an average entry is drawn about `window_alpha` times before its window closes.
    """
    if live_count <= 0:
        raise ValueError("window width needs a non-empty pool")
    return math.ceil(Fraction(params.window_alpha) * live_count / params.m_voters)


@dataclass(frozen=True)
class StakePool:
    """Every non-RELEASED stake entry at a given height.

    `schedule` maps a height to the ids that may change state there (maturity,
    expiry or release); `live_ids` is kept sorted, which fixes sortition order.
    """

    height: int = 0
    entries: Mapping[str, StakeEntry] = field(default_factory=dict)
    live_ids: tuple[str, ...] = ()
    schedule: Mapping[int, tuple[str, ...]] = field(default_factory=dict)
    locked: int = 0
    live_weight: int = 0

    @classmethod
    def genesis(cls, entries: Iterable[StakeEntry], params: ChainParams) -> StakePool:
        """Pool at height 0 whose entries are all LIVE from genesis."""
        staged = [
            StakeEntry(
                id=e.id,
                owner=e.owner,
                amount=e.amount,
                fee=e.fee,
                invoice_height=-params.stake_maturity,
                window_start=0,
                delegate=e.delegate,
            )
            for e in entries
        ]
        pool = cls(
            entries={e.id: e for e in staged},
            locked=sum(e.amount for e in staged),
        )
        if len(pool.entries) != len(staged):
            raise ValueError("Duplicate genesis stake entry ids")
        return pool._promote(0, [e.id for e in staged], params) if staged else pool

    def __len__(self) -> int:
        return len(self.live_ids)

    @cached_property
    def live_entries(self) -> tuple[StakeEntry, ...]:
        return tuple(self.entries[i] for i in self.live_ids)

    @cached_property
    def cumulative_weights(self) -> list[int]:
        return list(accumulate(e.amount for e in self.live_entries))

    def get(self, entry_id: str) -> StakeEntry | None:
        return self.entries.get(entry_id)

    def with_entries(self, new_entries: Iterable[StakeEntry]) -> StakePool:
        """Track newly invoiced PENDING entries."""
        entries = dict(self.entries)
        schedule = dict(self.schedule)
        locked = self.locked
        for entry in new_entries:
            if entry.id in entries:
                raise ValueError(f"Stake entry {entry.id} already tracked")
            if entry.status is not StakeStatus.PENDING:
                raise ValueError(f"Stake entry {entry.id} must enter the pool PENDING")
            entries[entry.id] = entry
            _schedule(schedule, entry.window_start, entry.id)
            locked += entry.amount
        return StakePool(
            height=self.height,
            entries=entries,
            live_ids=self.live_ids,
            schedule=schedule,
            locked=locked,
            live_weight=self.live_weight,
        )

    def advance(
        self, new_height: int, params: ChainParams
    ) -> tuple[StakePool, list[StakeEntry]]:
        """Move the pool to `new_height`; returns the pool and the entries released."""
        if new_height < self.height:
            raise ValueError(f"Pool cannot move back from {self.height} to {new_height}")
        pool = self
        released: list[StakeEntry] = []
        for h in range(self.height + 1, new_height + 1):
            due = pool.schedule.get(h)
            if not due:
                continue
            pool, freed = pool._process(h, due, params)
            released.extend(freed)
        if pool.height != new_height:
            pool = StakePool(
                height=new_height,
                entries=pool.entries,
                live_ids=pool.live_ids,
                schedule=pool.schedule,
                locked=pool.locked,
                live_weight=pool.live_weight,
            )
        return pool, released

    def _process(
        self, h: int, due: tuple[str, ...], params: ChainParams
    ) -> tuple[StakePool, list[StakeEntry]]:
        entries = dict(self.entries)
        live = list(self.live_ids)
        schedule = dict(self.schedule)
        schedule.pop(h, None)
        locked = self.locked
        live_weight = self.live_weight
        released: list[StakeEntry] = []
        promoted: list[str] = []

        for entry_id in due:
            entry = entries.get(entry_id)
            if entry is None:
                continue
            match entry.status:
                case StakeStatus.VOTED | StakeStatus.MISSED | StakeStatus.EXPIRED if (
                    entry.release_height == h
                ):
                    released.append(entry.transition(StakeStatus.RELEASED))
                    del entries[entry_id]
                    locked -= entry.locked
                case StakeStatus.LIVE if entry.window_end is not None and h > entry.window_end:
                    entries[entry_id] = entry.transition(
                        StakeStatus.EXPIRED, release_height=h + params.lock_after
                    )
                    live.pop(bisect.bisect_left(live, entry_id))
                    live_weight -= entry.amount
                    _schedule(schedule, h + params.lock_after, entry_id)
                case StakeStatus.PENDING if entry.window_start == h:
                    promoted.append(entry_id)

        pool = StakePool(
            height=h,
            entries=entries,
            live_ids=tuple(live),
            schedule=schedule,
            locked=locked,
            live_weight=live_weight,
        )
        if promoted:
            pool = pool._promote(h, promoted, params)
        return pool, released

    def _promote(self, h: int, ids: list[str], params: ChainParams) -> StakePool:
        entries = dict(self.entries)
        live = list(self.live_ids)
        schedule = dict(self.schedule)
        live_weight = self.live_weight + sum(entries[i].amount for i in ids)
        width = window_width(len(live) + len(ids), params)
        for entry_id in ids:
            entry = entries[entry_id]
            window_end = h + width
            entries[entry_id] = entry.transition(StakeStatus.LIVE, window_end=window_end)
            bisect.insort(live, entry_id)
            _schedule(schedule, window_end + 1, entry_id)
        return StakePool(
            height=h,
            entries=entries,
            live_ids=tuple(live),
            schedule=schedule,
            locked=self.locked,
            live_weight=live_weight,
        )

    def settle_votes(
        self,
        height: int,
        voted: Mapping[str, int],
        missed: Iterable[str],
        params: ChainParams,
    ) -> StakePool:
        """Close out the selected entries of the block at `height`.

        `voted` maps entry id to the voter reward paid into the entry.
        """
        entries = dict(self.entries)
        live = list(self.live_ids)
        schedule = dict(self.schedule)
        locked = self.locked
        live_weight = self.live_weight
        release_height = height + params.lock_after
        outcomes = [(i, StakeStatus.VOTED, r) for i, r in voted.items()]
        outcomes += [(i, StakeStatus.MISSED, 0) for i in missed]
        for entry_id, status, reward in outcomes:
            entry = entries.get(entry_id)
            if entry is None:
                raise KeyError(entry_id)
            entries[entry_id] = entry.transition(
                status, release_height=release_height, reward=entry.reward + reward
            )
            live.pop(bisect.bisect_left(live, entry_id))
            live_weight -= entry.amount
            locked += reward
            _schedule(schedule, release_height, entry_id)
        return StakePool(
            height=self.height,
            entries=entries,
            live_ids=tuple(live),
            schedule=schedule,
            locked=locked,
            live_weight=live_weight,
        )


def _schedule(schedule: dict[int, tuple[str, ...]], height: int, entry_id: str) -> None:
    schedule[height] = schedule.get(height, ()) + (entry_id,)


def advance_pool(pool: StakePool, new_height: int, params: ChainParams) -> StakePool:
    """Apply maturity, expiry and release events up to `new_height`."""
    return pool.advance(new_height, params)[0]
