from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from typing import Protocol

import numpy as np

from powpos_lab.chain.serialize import HEADER_SIZE, block_hash, header_bytes
from powpos_lab.chain.types import BlockHeader
from powpos_lab.hashing import HashAlgo, digest_value, meets_target, prefix_digester

_NONCE_LIMIT = 1 << 64


def _scan(
    prefix: bytes, algo: HashAlgo, target: int, start: int, stop: int
) -> tuple[int, bytes] | None:
    run = prefix_digester(algo, prefix)
    for nonce in range(start, stop):
        block_digest = run(nonce.to_bytes(8, "big"))
        if digest_value(block_digest) <= target:
            return nonce, block_digest
    return None


def mine_real(
    template: BlockHeader,
    algo: HashAlgo,
    start: int = 0,
    max_attempts: int = 1 << 20,
    workers: int = 1,
) -> tuple[int, bytes] | None:
    """Search [start, start + max_attempts) for the first nonce meeting the target.

    Returns (nonce, digest), or None when the range is exhausted. With several
    workers the range is split in contiguous shards and the lowest hit wins, so
    the answer does not depend on `workers`.
    """
    if max_attempts <= 0:
        return None
    stop = min(start + max_attempts, _NONCE_LIMIT)
    prefix = header_bytes(template)[: HEADER_SIZE - 8]
    if workers <= 1 or stop - start < 2 * workers:
        return _scan(prefix, algo, template.target, start, stop)

    step = -(-(stop - start) // workers)
    bounds = [(lo, min(lo + step, stop)) for lo in range(start, stop, step)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            pool.map(lambda b: _scan(prefix, algo, template.target, b[0], b[1]), bounds)
        )
    return next((r for r in results if r is not None), None)


def sample_block_time(hashpower: float, target: int, rng: np.random.Generator) -> float:
    """Seconds until a miner with `hashpower` finds a block at `target`."""
    if hashpower <= 0:
        raise ValueError("hashpower must be positive")
    mean = (1 << 256) / (max(target, 1) * hashpower)
    return float(rng.exponential(mean))


class MiningBackend(Protocol):
    """How a simulation node turns a header template into a sealed header."""

    checks_work: bool

    def seal(self, template: BlockHeader, rng: np.random.Generator) -> BlockHeader | None: ...

    def verify(self, header: BlockHeader) -> bool: ...


@dataclasses.dataclass(frozen=True, slots=True)
class RealBackend:
    """Grinds nonces for real; only sensible at toy difficulty."""

    algo: HashAlgo
    max_attempts: int = 1 << 20
    workers: int = 1
    checks_work: bool = True

    def seal(self, template: BlockHeader, rng: np.random.Generator) -> BlockHeader | None:
        start = int(rng.integers(0, 1 << 62))
        found = mine_real(template, self.algo, start, self.max_attempts, self.workers)
        if found is None:
            return None
        return dataclasses.replace(template, nonce=found[0])

    def verify(self, header: BlockHeader) -> bool:
        return meets_target(block_hash(header, self.algo), header.target)


@dataclasses.dataclass(frozen=True, slots=True)
class StochasticBackend:
    """Block discovery times are drawn by the simulator; the nonce is decorative."""

    algo: HashAlgo
    checks_work: bool = False

    def seal(self, template: BlockHeader, rng: np.random.Generator) -> BlockHeader | None:
        return dataclasses.replace(template, nonce=int(rng.integers(0, 1 << 63)))

    def verify(self, header: BlockHeader) -> bool:
        return True
