from __future__ import annotations

import hashlib
from collections.abc import Callable
from enum import Enum

DIGEST_SIZE = 32
MAX_TARGET = (1 << 256) - 1

HashAlgo = Enum("HashAlgo", ["DOUBLE_SHA256", "SHA3_256", "SHAKE_256"])


def digest(algo: HashAlgo, message: bytes) -> bytes:
    """Return the 32-byte digest of `message` under `algo`."""
    match algo:
        case HashAlgo.DOUBLE_SHA256:
            return hashlib.sha256(hashlib.sha256(message).digest()).digest()
        case HashAlgo.SHA3_256:
            return hashlib.sha3_256(message).digest()
        case HashAlgo.SHAKE_256:
            return hashlib.shake_256(message).digest(DIGEST_SIZE)
        case _:
            raise ValueError(f"Unknown hash algorithm: {algo}")


def shake_stream(seed: bytes, length: int) -> bytes:
    """First `length` bytes of the SHAKE-256 output stream seeded by `seed`."""
    return hashlib.shake_256(seed).digest(length)


def digest_value(data: bytes) -> int:
    return int.from_bytes(data, "big")


def meets_target(block_digest: bytes, target: int) -> bool:
    """True iff the big-endian value of the digest is <= target."""
    return digest_value(block_digest) <= target


def prefix_digester(algo: HashAlgo, prefix: bytes) -> Callable[[bytes], bytes]:
    """Digest function for messages sharing `prefix`; the prefix is absorbed once."""
    match algo:
        case HashAlgo.DOUBLE_SHA256:
            inner = hashlib.sha256(prefix)

            def run(suffix: bytes) -> bytes:
                h = inner.copy()
                h.update(suffix)
                return hashlib.sha256(h.digest()).digest()

        case HashAlgo.SHA3_256:
            inner3 = hashlib.sha3_256(prefix)

            def run(suffix: bytes) -> bytes:
                h = inner3.copy()
                h.update(suffix)
                return h.digest()

        case HashAlgo.SHAKE_256:
            inner_shake = hashlib.shake_256(prefix)

            def run(suffix: bytes) -> bytes:
                h = inner_shake.copy()
                h.update(suffix)
                return h.digest(DIGEST_SIZE)

        case _:
            raise ValueError(f"Unknown hash algorithm: {algo}")
    return run
