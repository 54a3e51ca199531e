from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Mapping, Sequence

import pytest

from powpos_lab.chain import COIN, Block, ChainParams, StakeEntry, Transaction, preset_params
from powpos_lab.chain.ledger import LedgerState, genesis_state
from powpos_lab.chain.serialize import block_body_commitment, block_hash
from powpos_lab.consensus import ChainIndex, assemble_block, candidate_for, make_genesis
from powpos_lab.hashing import MAX_TARGET
from powpos_lab.pos import cast_votes
from powpos_lab.sim import NetworkShape, ScenarioConfig

TICKET = 100 * COIN


def make_stakes(
    counts: Mapping[str, int], amount: int = TICKET, delegate: str | None = None
) -> list[StakeEntry]:
    return [
        StakeEntry(
            id=f"{owner}:{k:04d}",
            owner=owner,
            amount=amount,
            fee=0,
            invoice_height=0,
            window_start=0,
            delegate=delegate,
        )
        for owner, count in counts.items()
        for k in range(count)
    ]


def reseal(block: Block, params: ChainParams) -> Block:
    """Recompute the payload commitment after a test tampered with the body."""
    header = dataclasses.replace(
        block.header, payload_commitment=block_body_commitment(block, params.hash_algo)
    )
    return dataclasses.replace(block, header=header)


class ChainBuilder:
    """Hand-driven chain at trivial difficulty: every block carries one unit of work."""

    def __init__(
        self,
        params: ChainParams,
        allocations: Mapping[str, int] | None = None,
        stakes: Iterable[StakeEntry] = (),
        **index_options,
    ):
        self.params = params
        self.genesis_state = genesis_state(params, allocations or {}, list(stakes))
        self.genesis = make_genesis(params, MAX_TARGET)
        index_options.setdefault("fixed_target", MAX_TARGET)
        self.index = ChainIndex(
            self.genesis,
            self.genesis_state,
            params,
            **index_options,
        )

    @property
    def tip(self) -> bytes:
        return self.index.best_tip

    def hash_of(self, block: Block) -> bytes:
        return block_hash(block.header, self.params.hash_algo)

    def child(
        self,
        parent: bytes | None = None,
        miner: str = "miner-0",
        txs: Sequence[Transaction] = (),
        offline: Iterable[str] = (),
        timestamp: int | None = None,
    ) -> Block:
        view = self.index.parent_view(parent if parent is not None else self.tip)
        down = set(offline)
        candidate = candidate_for(view, miner, txs)
        online = {e.owner: e.owner not in down for e in view.roster}
        ballot = cast_votes(view.roster, candidate, online)
        if timestamp is None:
            timestamp = view.child_height * self.params.target_block_time
        return assemble_block(view, miner, txs, ballot, timestamp)

    def extend(self, parent: bytes | None = None, **kwargs) -> bytes:
        block = self.child(parent, **kwargs)
        self.index.extend_chain(block)
        return self.hash_of(block)

    def grow(self, count: int, parent: bytes | None = None, **kwargs) -> list[bytes]:
        hashes: list[bytes] = []
        cursor = parent
        for _ in range(count):
            cursor = self.extend(cursor, **kwargs)
            hashes.append(cursor)
        return hashes

    def state(self, block: bytes | None = None) -> LedgerState:
        return self.index.state_of(block if block is not None else self.tip)


@pytest.fixture
def pai() -> ChainParams:
    return preset_params("PROJECT_PAI")


@pytest.fixture
def params(pai: ChainParams) -> ChainParams:
    """PROJECT_PAI with short maturity and lock so lifecycles fit in a few blocks."""
    return pai.with_overrides({"stake_maturity": 4, "lock_after": 4})


@pytest.fixture
def chain(params: ChainParams) -> ChainBuilder:
    stakes = make_stakes({f"staker-{i}": 8 for i in range(8)})
    return ChainBuilder(params, {"alice": 1000 * COIN}, stakes)


def small_config(**changes) -> ScenarioConfig:
    """A network small enough for a test run; tickets recycle quickly."""
    base = ScenarioConfig.for_preset(
        "PROJECT_PAI",
        network=NetworkShape(honest_miners=2, stakers=16, tickets=480),
        run_blocks=40,
    )
    params = base.params.with_overrides({"stake_maturity": 16, "lock_after": 16})
    return dataclasses.replace(base, params=params, **changes)


@pytest.fixture
def sim_config() -> ScenarioConfig:
    return small_config()
