from __future__ import annotations

from collections.abc import Sequence

from powpos_lab.chain.params import ChainParams
from powpos_lab.chain.serialize import body_commitment, candidate_digest
from powpos_lab.chain.types import Block, BlockHeader, Transaction
from powpos_lab.consensus.validation import ParentView
from powpos_lab.pos.voting import Ballot

GENESIS_PARENT = bytes(32)


def make_genesis(params: ChainParams, target: int, timestamp: int = 0) -> Block:
    commitment = body_commitment(
        params.hash_algo,
        candidate_digest(params.hash_algo, GENESIS_PARENT, 0, "", ()),
        (),
        (),
        None,
    )
    return Block(
        header=BlockHeader(
            parent_hash=GENESIS_PARENT,
            height=0,
            payload_commitment=commitment,
            timestamp=timestamp,
            target=target,
        )
    )


def candidate_for(
    parent: ParentView, miner: str, transactions: Sequence[Transaction]
) -> bytes:
    """Digest the selected voters are asked to approve."""
    return candidate_digest(
        parent.params.hash_algo, parent.hash, parent.child_height, miner, tuple(transactions)
    )


def assemble_block(
    parent: ParentView,
    miner: str,
    transactions: Sequence[Transaction],
    ballot: Ballot,
    timestamp: int,
) -> Block:
    """Unsealed block (nonce 0) carrying the ballot and the matching coinbase.

    Raises RewardError when the ballot is short of a quorum.
    """
    params = parent.params
    txs = tuple(transactions)
    coinbase = parent.expected_coinbase(miner, len(ballot.votes))
    commitment = body_commitment(
        params.hash_algo,
        candidate_digest(params.hash_algo, parent.hash, parent.child_height, miner, txs),
        ballot.votes,
        ballot.missed,
        coinbase,
    )
    header = BlockHeader(
        parent_hash=parent.hash,
        height=parent.child_height,
        payload_commitment=commitment,
        timestamp=timestamp,
        target=parent.expected_target,
    )
    return Block(
        header=header,
        transactions=txs,
        votes=ballot.votes,
        missed=ballot.missed,
        coinbase=coinbase,
    )
