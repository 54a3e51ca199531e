import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from powpos_lab.chain import BlockHeader
from powpos_lab.chain.serialize import block_hash
from powpos_lab.hashing import MAX_TARGET, HashAlgo, meets_target
from powpos_lab.pow import (
    DifficultyState,
    RealBackend,
    StochasticBackend,
    initial_target,
    is_retarget_height,
    mine_real,
    retarget,
    sample_block_time,
)

OLD = MAX_TARGET >> 32


def expected_span(params):
    return params.retarget_interval * params.target_block_time


def template(target, parent=bytes(32)):
    return BlockHeader(
        parent_hash=parent,
        height=1,
        payload_commitment=bytes(range(32)),
        timestamp=600,
        target=target,
    )


def test_on_schedule_keeps_target(pai):
    assert retarget(OLD, expected_span(pai), pai) == OLD


def test_fast_blocks_raise_difficulty(pai):
    assert retarget(OLD, expected_span(pai) // 2, pai) == OLD // 2


def test_adjustment_is_clamped_to_factor_four(pai):
    span = expected_span(pai)
    assert retarget(OLD, Fraction(span, 100), pai) == OLD // 4
    assert retarget(OLD, span * 100, pai) == OLD * 4
    assert retarget(MAX_TARGET, span * 2, pai) == MAX_TARGET
    assert retarget(1, Fraction(span, 8), pai) == 1


def test_non_positive_span_is_rejected(pai):
    with pytest.raises(ValueError):
        retarget(OLD, 0, pai)


def test_retarget_stays_within_the_clamp_for_random_spans(pai):
    rng = np.random.default_rng(3)
    span = expected_span(pai)
    for _ in range(500):
        old = MAX_TARGET >> int(rng.integers(0, 250))
        actual = int(rng.integers(1, 100 * span))
        new = retarget(old, actual, pai)
        assert max(1, old // 4) <= new <= min(old * 4, MAX_TARGET)
        if span / 4 <= actual <= 4 * span:
            assert new == min(max(1, old * actual // span), MAX_TARGET)
    spans = np.sort(rng.integers(1, 100 * span, size=200))
    targets = [retarget(OLD, int(s), pai) for s in spans]
    assert all(a <= b for a, b in zip(targets, targets[1:]))


def test_retarget_heights(pai):
    assert not is_retarget_height(0, pai)
    assert not is_retarget_height(2015, pai)
    assert is_retarget_height(2016, pai)
    assert is_retarget_height(4032, pai)


def test_difficulty_state_measures_the_last_window(pai):
    params = pai.with_overrides({"retarget_interval": 10})
    state = DifficultyState(OLD, 0, params)
    assert state.for_child(9, lambda h: h * 300) is state
    # Blocks arrived every 300 s against a 600 s target
    child = state.for_child(10, lambda h: h * 300)
    assert child.target == OLD // 2
    assert child.boundary_timestamp == 9 * 300


def test_initial_target_matches_hashpower(pai):
    target = initial_target(1e6, pai)
    assert target == (1 << 256) // 600_000_000
    with pytest.raises(ValueError):
        initial_target(0, pai)


def test_mining_finds_a_valid_nonce():
    header = template(MAX_TARGET >> 8)
    found = mine_real(header, HashAlgo.SHA3_256, max_attempts=1 << 16)
    assert found is not None
    nonce, block_digest = found
    assert meets_target(block_digest, header.target)
    sealed = dataclasses.replace(header, nonce=nonce)
    assert block_hash(sealed, HashAlgo.SHA3_256) == block_digest


def test_parallel_search_returns_the_lowest_nonce():
    header = template(MAX_TARGET >> 10)
    single = mine_real(header, HashAlgo.DOUBLE_SHA256, max_attempts=1 << 14, workers=1)
    sharded = mine_real(header, HashAlgo.DOUBLE_SHA256, max_attempts=1 << 14, workers=4)
    assert single == sharded


def test_exhausted_range_returns_none():
    assert mine_real(template(1), HashAlgo.SHA3_256, max_attempts=64) is None
    assert mine_real(template(MAX_TARGET), HashAlgo.SHA3_256, max_attempts=0) is None


@pytest.mark.slow
def test_toy_target_needs_the_expected_number_of_attempts():
    attempts = []
    for i in range(100):
        header = template(MAX_TARGET >> 16, parent=i.to_bytes(32, "big"))
        nonce, _ = mine_real(header, HashAlgo.SHA3_256, max_attempts=1 << 22)
        attempts.append(nonce + 1)
    # Geometric with p = 2^-16: mean 65536, standard error of the mean ~6554
    assert 65536 * 0.7 < np.mean(attempts) < 65536 * 1.3


def test_real_backend_seals_and_verifies():
    backend = RealBackend(HashAlgo.SHA3_256)
    rng = np.random.default_rng(1)
    sealed = backend.seal(template(MAX_TARGET >> 6), rng)
    assert sealed is not None
    assert backend.verify(sealed)
    assert backend.checks_work


def test_stochastic_backend_accepts_any_header():
    backend = StochasticBackend(HashAlgo.SHA3_256)
    sealed = backend.seal(template(1), np.random.default_rng(1))
    assert backend.verify(sealed)
    assert not backend.checks_work


def test_block_time_mean(pai):
    rng = np.random.default_rng(2024)
    hashpower = 1e6
    target = initial_target(hashpower, pai)
    draws = [sample_block_time(hashpower, target, rng) for _ in range(100_000)]
    bound = 3 * 600 / np.sqrt(100_000)
    assert abs(np.mean(draws) - 600) < bound
