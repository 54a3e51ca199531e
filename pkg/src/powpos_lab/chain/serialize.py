"""Canonical encodings.

Header (120 bytes, all big-endian, fixed order):

    parent hash          32 B
    height                8 B  unsigned
    payload commitment   32 B
    timestamp             8 B  unsigned seconds
    target               32 B  unsigned 256-bit
    nonce                 8 B  unsigned

Bodies are hashed as compact JSON with sorted keys. The candidate digest (what
voters approve) covers parent hash, height, miner and transactions; the header
commitment covers the candidate digest plus votes, missed entries and coinbase.
"""

from __future__ import annotations

import json
from typing import Any

from powpos_lab.chain.types import (
    Block,
    BlockHeader,
    Coinbase,
    Transaction,
    TxKind,
    Vote,
)
from powpos_lab.hashing import HashAlgo, digest

HEADER_SIZE = 120


def header_bytes(header: BlockHeader) -> bytes:
    if len(header.parent_hash) != 32 or len(header.payload_commitment) != 32:
        raise ValueError("parent hash and payload commitment must be 32 bytes")
    return b"".join(
        (
            header.parent_hash,
            header.height.to_bytes(8, "big"),
            header.payload_commitment,
            header.timestamp.to_bytes(8, "big"),
            header.target.to_bytes(32, "big"),
            header.nonce.to_bytes(8, "big"),
        )
    )


def block_hash(header: BlockHeader, algo: HashAlgo) -> bytes:
    return digest(algo, header_bytes(header))


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def tx_to_dict(tx: Transaction) -> dict[str, Any]:
    return {
        "id": tx.id,
        "kind": tx.kind.name,
        "sender": tx.sender,
        "recipient": tx.recipient,
        "amount": tx.amount,
        "fee": tx.fee,
        "delegate": tx.delegate,
    }


def tx_from_dict(data: dict[str, Any]) -> Transaction:
    return Transaction(
        id=data["id"],
        kind=TxKind[data["kind"]],
        sender=data["sender"],
        recipient=data.get("recipient"),
        amount=data["amount"],
        fee=data.get("fee", 0),
        delegate=data.get("delegate"),
    )


def vote_to_dict(vote: Vote) -> dict[str, Any]:
    return {
        "entry_id": vote.entry_id,
        "voter": vote.voter,
        "candidate": vote.candidate.hex(),
        "approve": vote.approve,
    }


def coinbase_to_dict(coinbase: Coinbase | None) -> dict[str, Any] | None:
    if coinbase is None:
        return None
    return {
        "miner": coinbase.miner,
        "miner_amount": coinbase.miner_amount,
        "voter_amount": coinbase.voter_amount,
        "dev_amount": coinbase.dev_amount,
        "burned": coinbase.burned,
    }


def candidate_digest(
    algo: HashAlgo,
    parent_hash: bytes,
    height: int,
    miner: str,
    transactions: tuple[Transaction, ...],
) -> bytes:
    payload = {
        "parent": parent_hash.hex(),
        "height": height,
        "miner": miner,
        "transactions": [tx_to_dict(tx) for tx in transactions],
    }
    return digest(algo, canonical_json(payload))


def body_commitment(
    algo: HashAlgo,
    candidate: bytes,
    votes: tuple[Vote, ...],
    missed: tuple[str, ...],
    coinbase: Coinbase | None,
) -> bytes:
    body = {
        "candidate": candidate.hex(),
        "votes": [vote_to_dict(v) for v in votes],
        "missed": list(missed),
        "coinbase": coinbase_to_dict(coinbase),
    }
    return digest(algo, canonical_json(body))


def block_candidate_digest(block: Block, algo: HashAlgo) -> bytes:
    return candidate_digest(
        algo,
        block.header.parent_hash,
        block.header.height,
        block.miner or "",
        block.transactions,
    )


def block_body_commitment(block: Block, algo: HashAlgo) -> bytes:
    return body_commitment(
        algo,
        block_candidate_digest(block, algo),
        block.votes,
        block.missed,
        block.coinbase,
    )


def block_to_dict(block: Block, algo: HashAlgo) -> dict[str, Any]:
    """Export form of a block; keys are emitted in this fixed order."""
    header = block.header
    return {
        "hash": block_hash(header, algo).hex(),
        "height": header.height,
        "parent_hash": header.parent_hash.hex(),
        "payload_commitment": header.payload_commitment.hex(),
        "timestamp": header.timestamp,
        "target": f"{header.target:064x}",
        "nonce": header.nonce,
        "coinbase": coinbase_to_dict(block.coinbase),
        "transactions": [tx_to_dict(tx) for tx in block.transactions],
        "votes": [vote_to_dict(v) for v in block.votes],
        "missed": list(block.missed),
    }


def block_from_dict(data: dict[str, Any]) -> Block:
    header = BlockHeader(
        parent_hash=bytes.fromhex(data["parent_hash"]),
        height=data["height"],
        payload_commitment=bytes.fromhex(data["payload_commitment"]),
        timestamp=data["timestamp"],
        target=int(data["target"], 16),
        nonce=data["nonce"],
    )
    coinbase = data.get("coinbase")
    return Block(
        header=header,
        transactions=tuple(tx_from_dict(t) for t in data.get("transactions", [])),
        votes=tuple(
            Vote(
                entry_id=v["entry_id"],
                voter=v["voter"],
                candidate=bytes.fromhex(v["candidate"]),
                approve=v.get("approve", True),
            )
            for v in data.get("votes", [])
        ),
        missed=tuple(data.get("missed", [])),
        coinbase=Coinbase(**coinbase) if coinbase is not None else None,
    )
