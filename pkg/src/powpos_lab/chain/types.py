from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum

TxKind = Enum("TxKind", ["TRANSFER", "STAKE_SUBMISSION"])

StakeStatus = Enum(
    "StakeStatus", ["PENDING", "LIVE", "VOTED", "MISSED", "EXPIRED", "RELEASED"]
)

_ALLOWED_TRANSITIONS: dict[StakeStatus, frozenset[StakeStatus]] = {
    StakeStatus.PENDING: frozenset({StakeStatus.LIVE}),
    StakeStatus.LIVE: frozenset(
        {StakeStatus.VOTED, StakeStatus.MISSED, StakeStatus.EXPIRED}
    ),
    StakeStatus.VOTED: frozenset({StakeStatus.RELEASED}),
    StakeStatus.MISSED: frozenset({StakeStatus.RELEASED}),
    StakeStatus.EXPIRED: frozenset({StakeStatus.RELEASED}),
    StakeStatus.RELEASED: frozenset(),
}


class StakeTransitionError(RuntimeError):
    def __init__(self, entry_id: str, current: StakeStatus, requested: StakeStatus):
        super().__init__(
            f"Stake entry {entry_id}: illegal transition {current.name} -> {requested.name}"
        )
        self.entry_id = entry_id
        self.current = current
        self.requested = requested


@dataclass(frozen=True, slots=True)
class Transaction:
    id: str
    kind: TxKind
    sender: str
    amount: int
    fee: int = 0
    recipient: str | None = None
    delegate: str | None = None

    def __post_init__(self) -> None:
        if self.amount <= 0:
            raise ValueError(f"Transaction {self.id}: amount must be positive")
        if self.fee < 0:
            raise ValueError(f"Transaction {self.id}: fee must be >= 0")
        if self.kind is TxKind.TRANSFER and self.recipient is None:
            raise ValueError(f"Transaction {self.id}: transfer without recipient")
        if self.kind is TxKind.STAKE_SUBMISSION and self.recipient is not None:
            raise ValueError(f"Transaction {self.id}: stake submission with recipient")

    @property
    def debit(self) -> int:
        return self.amount + self.fee


@dataclass(frozen=True, slots=True)
class StakeEntry:
    """One staking invoice and its lifecycle.

    The eligibility window is [window_start, window_end]; window_end is fixed
    when the entry goes LIVE. Voter rewards accrue in `reward` and are paid out
    together with `amount` at `release_height`.
    """

    id: str
    owner: str
    amount: int
    fee: int
    invoice_height: int
    window_start: int
    status: StakeStatus = StakeStatus.PENDING
    delegate: str | None = None
    window_end: int | None = None
    release_height: int | None = None
    reward: int = 0

    @property
    def locked(self) -> int:
        return self.amount + self.reward

    def in_window(self, height: int) -> bool:
        return (
            self.window_end is not None
            and self.window_start <= height <= self.window_end
        )

    def transition(self, status: StakeStatus, **changes) -> StakeEntry:
        if status not in _ALLOWED_TRANSITIONS[self.status]:
            raise StakeTransitionError(self.id, self.status, status)
        return dataclasses.replace(self, status=status, **changes)


@dataclass(frozen=True, slots=True)
class Vote:
    entry_id: str
    voter: str
    candidate: bytes
    approve: bool = True


@dataclass(frozen=True, slots=True)
class Coinbase:
    """Subsidy payouts of a block. `voter_amount` is paid to each voting entry;
    `burned` is minted and destroyed in the same block."""

    miner: str
    miner_amount: int
    voter_amount: int
    dev_amount: int
    burned: int = 0


@dataclass(frozen=True, slots=True)
class BlockHeader:
    parent_hash: bytes
    height: int
    payload_commitment: bytes
    timestamp: int
    target: int
    nonce: int = 0


@dataclass(frozen=True, slots=True)
class Block:
    header: BlockHeader
    transactions: tuple[Transaction, ...] = ()
    votes: tuple[Vote, ...] = ()
    missed: tuple[str, ...] = ()
    coinbase: Coinbase | None = None

    @property
    def height(self) -> int:
        return self.header.height

    @property
    def miner(self) -> str | None:
        return self.coinbase.miner if self.coinbase is not None else None

    @property
    def invoices(self) -> tuple[str, ...]:
        """Ids of the stake entries this block creates."""
        return tuple(
            tx.id for tx in self.transactions if tx.kind is TxKind.STAKE_SUBMISSION
        )
