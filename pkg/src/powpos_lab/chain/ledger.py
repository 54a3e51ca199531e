"""Account ledger and supply accounting at a chain tip."""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum

from powpos_lab.chain.params import ChainParams, format_coins
from powpos_lab.chain.types import (
    Block,
    StakeEntry,
    StakeTransitionError,
    TxKind,
)
from powpos_lab.pos.pool import StakePool

LedgerFailure = Enum(
    "LedgerFailure",
    [
        "OVERSPEND",
        "DUPLICATE_TX",
        "UNKNOWN_ENTRY",
        "HEIGHT_MISMATCH",
        "CONSERVATION_VIOLATION",
    ],
)


class LedgerError(RuntimeError):
    def __init__(self, kind: LedgerFailure, message: str, height: int | None = None):
        where = f" at height {height}" if height is not None else ""
        super().__init__(f"{kind.name}{where}: {message}")
        self.kind = kind
        self.height = height


class ConservationError(LedgerError):
    """Supply accounting broke; the run that produced it must stop."""

    def __init__(self, message: str, height: int | None = None):
        super().__init__(LedgerFailure.CONSERVATION_VIOLATION, message, height)


@dataclass(frozen=True, slots=True)
class TxIdSet:
    """Persistent set of applied transaction ids.

    Successive ledger states share `base`; only the small `recent` part is
    copied per block and it is folded into a new base once it grows.
    """

    base: frozenset[str] = frozenset()
    recent: frozenset[str] = frozenset()

    FOLD_AT = 2048

    def __contains__(self, tx_id: object) -> bool:
        return tx_id in self.recent or tx_id in self.base

    def __len__(self) -> int:
        return len(self.base) + len(self.recent)

    def union(self, ids: Iterable[str]) -> TxIdSet:
        recent = self.recent.union(ids)
        if len(recent) >= self.FOLD_AT:
            return TxIdSet(self.base | recent, frozenset())
        return TxIdSet(self.base, recent)


@dataclass(frozen=True, slots=True)
class LedgerState:
    height: int
    balances: Mapping[str, int]
    pool: StakePool
    minted: int
    burned: int
    dev_fund: int = 0
    applied_tx_ids: TxIdSet = field(default_factory=TxIdSet)

    def balance(self, account: str) -> int:
        return self.balances.get(account, 0)

    @property
    def spendable_total(self) -> int:
        return sum(self.balances.values())

    @property
    def circulating(self) -> int:
        return self.minted - self.burned

    def check_conservation(self, params: ChainParams) -> None:
        held = self.spendable_total + self.pool.locked + self.dev_fund
        if held != self.circulating:
            raise ConservationError(
                f"spendable+locked+dev={held} but minted-burned={self.circulating}",
                self.height,
            )
        if self.minted > params.total_supply_cap:
            raise ConservationError(
                f"minted {format_coins(self.minted)} exceeds the supply cap "
                f"{format_coins(params.total_supply_cap)}",
                self.height,
            )


def genesis_state(
    params: ChainParams,
    allocations: Mapping[str, int],
    stakes: Iterable[StakeEntry] = (),
) -> LedgerState:
    """Ledger at height 0: premined balances plus stake that is live from genesis."""
    if any(amount < 0 for amount in allocations.values()):
        raise LedgerError(LedgerFailure.OVERSPEND, "negative genesis allocation", 0)
    pool = StakePool.genesis(stakes, params)
    state = LedgerState(
        height=0,
        balances={k: v for k, v in allocations.items() if v},
        pool=pool,
        minted=sum(allocations.values()) + pool.locked,
        burned=0,
    )
    state.check_conservation(params)
    return state


def apply_block(state: LedgerState, block: Block, params: ChainParams) -> LedgerState:
    """Apply an already validated block on top of `state`.

    Order: stake releases and maturities due at the block height, vote
    outcomes, transactions in block order, then coinbase payouts.
    """
    height = block.height
    if height != state.height + 1:
        raise LedgerError(
            LedgerFailure.HEIGHT_MISMATCH,
            f"block at height {height} on a ledger at height {state.height}",
            height,
        )

    tx_ids = [tx.id for tx in block.transactions]
    if len(set(tx_ids)) != len(tx_ids):
        raise LedgerError(LedgerFailure.DUPLICATE_TX, "repeated id inside block", height)
    for tx_id in tx_ids:
        if tx_id in state.applied_tx_ids:
            raise LedgerError(LedgerFailure.DUPLICATE_TX, f"'{tx_id}' already applied", height)

    balances = dict(state.balances)
    pool, released = state.pool.advance(height, params)
    for entry in released:
        balances[entry.owner] = balances.get(entry.owner, 0) + entry.locked

    coinbase = block.coinbase
    per_voter = coinbase.voter_amount if coinbase is not None else 0
    voted = {vote.entry_id: per_voter for vote in block.votes}
    try:
        pool = pool.settle_votes(height, voted, block.missed, params)
    except KeyError as exc:
        raise LedgerError(
            LedgerFailure.UNKNOWN_ENTRY, f"stake entry {exc.args[0]} not in pool", height
        ) from None
    except StakeTransitionError as exc:
        raise LedgerError(LedgerFailure.UNKNOWN_ENTRY, str(exc), height) from None

    miner = block.miner
    new_entries: list[StakeEntry] = []
    fees = 0
    for tx in block.transactions:
        remaining = balances.get(tx.sender, 0) - tx.debit
        if remaining < 0:
            raise LedgerError(
                LedgerFailure.OVERSPEND,
                f"{tx.sender} cannot cover {format_coins(tx.debit)} in '{tx.id}'",
                height,
            )
        balances[tx.sender] = remaining
        fees += tx.fee
        match tx.kind:
            case TxKind.TRANSFER:
                balances[tx.recipient] = balances.get(tx.recipient, 0) + tx.amount
            case TxKind.STAKE_SUBMISSION:
                new_entries.append(
                    StakeEntry(
                        id=tx.id,
                        owner=tx.sender,
                        amount=tx.amount,
                        fee=tx.fee,
                        invoice_height=height,
                        window_start=height + params.stake_maturity,
                        delegate=tx.delegate,
                    )
                )
    if new_entries:
        try:
            pool = pool.with_entries(new_entries)
        except ValueError as exc:
            raise LedgerError(LedgerFailure.DUPLICATE_TX, str(exc), height) from None

    minted = state.minted
    burned = state.burned
    dev_fund = state.dev_fund
    if fees:
        if miner is None:
            raise LedgerError(LedgerFailure.OVERSPEND, "fees without a coinbase", height)
        balances[miner] = balances.get(miner, 0) + fees
    if coinbase is not None:
        balances[miner] = balances.get(miner, 0) + coinbase.miner_amount
        dev_fund += coinbase.dev_amount
        minted += (
            coinbase.miner_amount
            + per_voter * len(block.votes)
            + coinbase.dev_amount
            + coinbase.burned
        )
        burned += coinbase.burned

    new_state = LedgerState(
        height=height,
        balances={k: v for k, v in balances.items() if v},
        pool=pool,
        minted=minted,
        burned=burned,
        dev_fund=dev_fund,
        applied_tx_ids=state.applied_tx_ids.union(tx_ids) if tx_ids else state.applied_tx_ids,
    )
    new_state.check_conservation(params)
    return new_state
