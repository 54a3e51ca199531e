import itertools

import numpy as np
import pytest

from powpos_lab.hashing import (
    DIGEST_SIZE,
    MAX_TARGET,
    HashAlgo,
    digest,
    digest_value,
    meets_target,
    prefix_digester,
    shake_stream,
)

EMPTY = {
    HashAlgo.SHA3_256: "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a",
    HashAlgo.DOUBLE_SHA256: "5df6e0e2761359d30a8275058e299fcc0381534545f55cf43e41983f5d4c9456",
    HashAlgo.SHAKE_256: "46b9dd2b0ba88d13233b3feb743eeb243fcd52ea62b81b82b50c27646ed5762f",
}


@pytest.mark.parametrize("algo", list(HashAlgo))
def test_empty_message_vectors(algo):
    assert digest(algo, b"").hex() == EMPTY[algo]


def test_abc_vectors():
    assert (
        digest(HashAlgo.SHA3_256, b"abc").hex()
        == "3a985da74fe225b2045c172d6bd390bd855f086e3e9d525b46bfe24511431532"
    )
    assert (
        digest(HashAlgo.SHAKE_256, b"abc").hex()
        == "483366601360a8771c6863080cc4114d8db44530f8f1e1ee4f94ea37e78b5739"
    )


@pytest.mark.parametrize("algo", list(HashAlgo))
def test_digest_is_32_bytes(algo):
    assert len(digest(algo, b"powpos" * 100)) == DIGEST_SIZE


def test_shake_stream_extends_the_same_output():
    long = shake_stream(b"seed", 64)
    assert len(long) == 64
    assert shake_stream(b"seed", 16) == long[:16]
    assert shake_stream(b"", 32).hex() == EMPTY[HashAlgo.SHAKE_256]


@pytest.mark.parametrize("algo", list(HashAlgo))
def test_prefix_digester_matches_plain_digest(algo):
    prefix = bytes(range(112))
    run = prefix_digester(algo, prefix)
    for nonce in (0, 1, 2**63):
        suffix = nonce.to_bytes(8, "big")
        assert run(suffix) == digest(algo, prefix + suffix)


def test_target_boundary_is_inclusive():
    top = b"\xff" * 32
    assert meets_target(top, MAX_TARGET)
    value = digest_value(digest(HashAlgo.SHA3_256, b""))
    block_digest = digest(HashAlgo.SHA3_256, b"")
    assert meets_target(block_digest, value)
    assert not meets_target(block_digest, value - 1)
    assert meets_target(bytes(32), 0)


def bit_fraction(a: bytes, b: bytes) -> float:
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).bit_count() / (8 * DIGEST_SIZE)


@pytest.mark.parametrize("algo", list(HashAlgo))
def test_single_bit_flip_changes_half_the_digest(algo):
    rng = np.random.default_rng(5)
    fractions = []
    for _ in range(300):
        message = bytearray(rng.bytes(48))
        base = digest(algo, bytes(message))
        bit = int(rng.integers(48 * 8))
        message[bit // 8] ^= 1 << (bit % 8)
        fractions.append(bit_fraction(base, digest(algo, bytes(message))))
    # 300 x 256 bits: the mean has a standard deviation near 0.002
    assert np.mean(fractions) == pytest.approx(0.5, abs=0.015)
    assert min(fractions) > 0.3


@pytest.mark.parametrize("first, second", list(itertools.combinations(HashAlgo, 2)))
def test_algorithms_are_independent(first, second):
    rng = np.random.default_rng(9)
    messages = [rng.bytes(int(rng.integers(1, 200))) for _ in range(300)]
    agreement = [1 - bit_fraction(digest(first, m), digest(second, m)) for m in messages]
    assert np.mean(agreement) == pytest.approx(0.5, abs=0.015)
    assert all(digest(first, m) != digest(second, m) for m in messages)
