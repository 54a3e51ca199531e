from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

from powpos_lab.chain.ledger import LedgerError, LedgerState, apply_block
from powpos_lab.chain.params import ChainParams, block_reward_at
from powpos_lab.chain.serialize import block_body_commitment, block_candidate_digest, block_hash
from powpos_lab.chain.types import Block, Coinbase, StakeEntry
from powpos_lab.hashing import meets_target
from powpos_lab.pos import PoolTooSmallError, StakePool, select_voters, sortition_seed
from powpos_lab.consensus.rewards import RewardError, distribute_reward

ValidationFailure = Enum(
    "ValidationFailure",
    [
        "BAD_POW",
        "BAD_LINKAGE",
        "BAD_COMMITMENT",
        "INSUFFICIENT_VOTES",
        "UNAUTHORIZED_VOTER",
        "BAD_COINBASE",
        "BAD_TX",
    ],
)


class ValidationError(ValueError):
    def __init__(self, reason: ValidationFailure, message: str):
        super().__init__(f"{reason.name}: {message}")
        self.reason = reason


@dataclass(frozen=True)
class ParentView:
    """A block seen as the parent of the next candidate."""

    hash: bytes
    height: int
    state: LedgerState
    expected_target: int
    params: ChainParams

    @property
    def child_height(self) -> int:
        return self.height + 1

    @cached_property
    def child_pool(self) -> StakePool:
        return self.state.pool.advance(self.child_height, self.params)[0]

    @cached_property
    def seed(self) -> bytes:
        return sortition_seed(self.params.hash_algo, self.hash, self.child_height)

    @cached_property
    def selected(self) -> tuple[str, ...]:
        """Entry ids chosen to vote on any child; raises PoolTooSmallError."""
        return select_voters(self.child_pool, self.seed, self.params.m_voters)

    @cached_property
    def roster(self) -> tuple[StakeEntry, ...]:
        pool = self.child_pool
        return tuple(pool.entries[i] for i in self.selected)

    @cached_property
    def can_vote(self) -> bool:
        try:
            self.selected
        except PoolTooSmallError:
            return False
        return True

    def expected_coinbase(self, miner: str, votes: int) -> Coinbase:
        reward = block_reward_at(self.child_height, self.params, self.state.minted)
        split = distribute_reward(reward, votes, self.params)
        return Coinbase(
            miner=miner,
            miner_amount=split.miner,
            voter_amount=split.per_voter,
            dev_amount=split.dev,
            burned=split.burned,
        )


def validate_block(
    block: Block,
    parent: ParentView,
    params: ChainParams,
    check_work: bool = True,
) -> LedgerState:
    """Check every validity clause and return the ledger after the block.

    Raises ValidationError naming the first clause that fails.
    """
    header = block.header
    algo = params.hash_algo

    if header.parent_hash != parent.hash or header.height != parent.child_height:
        raise ValidationError(
            ValidationFailure.BAD_LINKAGE,
            f"block claims parent {header.parent_hash.hex()[:12]} at height "
            f"{header.height}, parent is {parent.hash.hex()[:12]} at {parent.height}",
        )
    if header.target != parent.expected_target:
        raise ValidationError(
            ValidationFailure.BAD_POW,
            f"target {header.target:#x} differs from required {parent.expected_target:#x}",
        )
    if check_work and not meets_target(block_hash(header, algo), header.target):
        raise ValidationError(ValidationFailure.BAD_POW, "header digest above target")
    if header.payload_commitment != block_body_commitment(block, algo):
        raise ValidationError(
            ValidationFailure.BAD_COMMITMENT, "payload commitment does not match body"
        )
    if block.coinbase is None:
        raise ValidationError(ValidationFailure.BAD_COINBASE, "missing coinbase")

    _check_votes(block, parent, params)

    try:
        expected = parent.expected_coinbase(block.coinbase.miner, len(block.votes))
    except RewardError as exc:
        raise ValidationError(ValidationFailure.INSUFFICIENT_VOTES, str(exc)) from None
    if block.coinbase != expected:
        raise ValidationError(
            ValidationFailure.BAD_COINBASE, f"coinbase {block.coinbase} expected {expected}"
        )

    try:
        return apply_block(parent.state, block, params)
    except LedgerError as exc:
        raise ValidationError(ValidationFailure.BAD_TX, str(exc)) from None


def _check_votes(block: Block, parent: ParentView, params: ChainParams) -> None:
    votes = block.votes
    if len(votes) < params.n_quorum:
        raise ValidationError(
            ValidationFailure.INSUFFICIENT_VOTES,
            f"{len(votes)} votes, {params.n_quorum} required",
        )
    try:
        selected = set(parent.selected)
    except PoolTooSmallError as exc:
        raise ValidationError(ValidationFailure.INSUFFICIENT_VOTES, str(exc)) from None

    height = block.height
    candidate = block_candidate_digest(block, params.hash_algo)
    pool = parent.child_pool
    seen: set[str] = set()
    for vote in votes:
        entry = pool.get(vote.entry_id)
        if vote.entry_id not in selected or entry is None or vote.entry_id in seen:
            raise ValidationError(
                ValidationFailure.UNAUTHORIZED_VOTER,
                f"entry {vote.entry_id} was not selected for height {height}",
            )
        seen.add(vote.entry_id)
        if vote.voter not in (entry.owner, entry.delegate):
            raise ValidationError(
                ValidationFailure.UNAUTHORIZED_VOTER,
                f"{vote.voter} may not sign for entry {entry.id}",
            )
        if not vote.approve or vote.candidate != candidate:
            raise ValidationError(
                ValidationFailure.UNAUTHORIZED_VOTER,
                f"vote of {entry.id} does not approve this candidate",
            )
        if not entry.in_window(height) or entry.invoice_height >= height:
            raise ValidationError(
                ValidationFailure.UNAUTHORIZED_VOTER,
                f"entry {entry.id} is not eligible at height {height}",
            )
    missed = set(block.missed)
    if len(missed) != len(block.missed) or missed & seen or missed | seen != selected:
        raise ValidationError(
            ValidationFailure.UNAUTHORIZED_VOTER,
            "votes and missed entries do not cover the selected voters",
        )
