import dataclasses

import pytest
from conftest import TICKET, make_stakes

from powpos_lab.chain import (
    COIN,
    Block,
    BlockHeader,
    Coinbase,
    StakeStatus,
    Transaction,
    TxKind,
    Vote,
)
from powpos_lab.chain.ledger import (
    ConservationError,
    LedgerError,
    LedgerFailure,
    TxIdSet,
    apply_block,
    genesis_state,
)
from powpos_lab.consensus import distribute_reward
from powpos_lab.hashing import MAX_TARGET


def raw_block(height, txs=(), votes=(), missed=(), coinbase=None):
    header = BlockHeader(
        parent_hash=bytes(32),
        height=height,
        payload_commitment=bytes(32),
        timestamp=height * 600,
        target=MAX_TARGET,
    )
    return Block(
        header=header,
        transactions=tuple(txs),
        votes=tuple(votes),
        missed=tuple(missed),
        coinbase=coinbase,
    )


def fee_only(miner="miner"):
    return Coinbase(miner=miner, miner_amount=0, voter_amount=0, dev_amount=0)


def transfer(tx_id, sender, recipient, amount, fee=0):
    return Transaction(
        id=tx_id, kind=TxKind.TRANSFER, sender=sender, recipient=recipient, amount=amount, fee=fee
    )


def assert_conserved(state):
    assert state.spendable_total + state.pool.locked + state.dev_fund == state.minted - state.burned


@pytest.fixture
def genesis(params):
    return genesis_state(params, {"alice": 100 * COIN}, make_stakes({"bob": 4, "carol": 4}))


def test_genesis_accounting(genesis):
    assert genesis.height == 0
    assert genesis.pool.locked == 8 * TICKET
    assert genesis.minted == 100 * COIN + 8 * TICKET
    assert len(genesis.pool) == 8
    assert_conserved(genesis)


def test_transfer_moves_balance_and_fee(genesis, params):
    tx = transfer("t1", "alice", "dave", 30 * COIN, fee=COIN)
    block = raw_block(1, [tx], coinbase=fee_only())
    state = apply_block(genesis, block, params)
    assert state.balance("alice") == 69 * COIN
    assert state.balance("dave") == 30 * COIN
    assert state.balance("miner") == COIN
    assert "t1" in state.applied_tx_ids
    assert_conserved(state)


def test_overspend_is_rejected(genesis, params):
    block = raw_block(1, [transfer("t1", "alice", "dave", 101 * COIN)])
    with pytest.raises(LedgerError) as info:
        apply_block(genesis, block, params)
    assert info.value.kind is LedgerFailure.OVERSPEND
    assert info.value.height == 1


def test_spending_received_coins_in_the_same_block(genesis, params):
    txs = [transfer("t1", "alice", "dave", 60 * COIN), transfer("t2", "dave", "erin", 50 * COIN)]
    state = apply_block(genesis, raw_block(1, txs), params)
    assert state.balance("dave") == 10 * COIN
    assert state.balance("erin") == 50 * COIN


def test_replayed_transactions_are_rejected(genesis, params):
    tx = transfer("t1", "alice", "dave", 10 * COIN)
    state = apply_block(genesis, raw_block(1, [tx]), params)
    with pytest.raises(LedgerError) as info:
        apply_block(state, raw_block(2, [tx]), params)
    assert info.value.kind is LedgerFailure.DUPLICATE_TX
    with pytest.raises(LedgerError) as info:
        apply_block(state, raw_block(1, [tx]), params)
    assert info.value.kind is LedgerFailure.HEIGHT_MISMATCH


def test_stake_submission_locks_and_matures(genesis, params):
    stake = Transaction(
        id="s1", kind=TxKind.STAKE_SUBMISSION, sender="alice", amount=10 * COIN, fee=COIN
    )
    state = apply_block(genesis, raw_block(1, [stake], coinbase=fee_only()), params)
    entry = state.pool.get("s1")
    assert entry.status is StakeStatus.PENDING
    assert entry.window_start == 1 + params.stake_maturity
    assert state.pool.locked == 8 * TICKET + 10 * COIN
    assert state.balance("alice") == 89 * COIN
    assert_conserved(state)

    for height in range(2, 2 + params.stake_maturity):
        state = apply_block(state, raw_block(height), params)
    assert state.pool.get("s1").status is StakeStatus.LIVE
    assert "s1" in state.pool.live_ids


def test_full_quorum_coinbase(genesis, params):
    ids = genesis.pool.live_ids[:5]
    split = distribute_reward(1500 * COIN, 5, params)
    coinbase = Coinbase("miner", split.miner, split.per_voter, split.dev, split.burned)
    votes = [Vote(entry_id=i, voter=i.split(":")[0], candidate=bytes(32)) for i in ids]
    state = apply_block(genesis, raw_block(1, votes=votes, coinbase=coinbase), params)

    assert state.balance("miner") == 900 * COIN
    assert state.dev_fund == 150 * COIN
    assert state.minted - genesis.minted == 1500 * COIN
    assert state.pool.locked == 8 * TICKET + 5 * 90 * COIN
    assert all(state.pool.get(i).status is StakeStatus.VOTED for i in ids)
    assert_conserved(state)


def test_short_quorum_burns_and_withholds(genesis, params):
    ids = genesis.pool.live_ids[:5]
    split = distribute_reward(1500 * COIN, 4, params)
    coinbase = Coinbase("miner", split.miner, split.per_voter, split.dev, split.burned)
    votes = [Vote(entry_id=i, voter=i.split(":")[0], candidate=bytes(32)) for i in ids[:4]]
    state = apply_block(
        genesis, raw_block(1, votes=votes, missed=[ids[4]], coinbase=coinbase), params
    )
    assert state.burned == 90 * COIN
    # 180 coins of the miner's cut are never minted
    assert state.minted - genesis.minted == 1500 * COIN - 180 * COIN
    assert state.pool.get(ids[4]).status is StakeStatus.MISSED
    assert_conserved(state)


def test_missed_entry_is_released_after_lock(genesis, params):
    missed = genesis.pool.live_ids[0]
    owner = genesis.pool.get(missed).owner
    state = apply_block(genesis, raw_block(1, missed=[missed]), params)
    assert state.pool.get(missed).release_height == 1 + params.lock_after
    for height in range(2, 2 + params.lock_after):
        state = apply_block(state, raw_block(height), params)
    assert state.pool.get(missed) is None
    assert state.balance(owner) == TICKET
    assert_conserved(state)


def test_vote_for_unknown_entry(genesis, params):
    vote = Vote(entry_id="nobody:0", voter="nobody", candidate=bytes(32))
    with pytest.raises(LedgerError) as info:
        apply_block(genesis, raw_block(1, votes=[vote]), params)
    assert info.value.kind is LedgerFailure.UNKNOWN_ENTRY


def test_conservation_violation_is_detected(genesis, params):
    broken = dataclasses.replace(genesis, minted=genesis.minted + 1)
    with pytest.raises(ConservationError) as info:
        broken.check_conservation(params)
    assert info.value.kind is LedgerFailure.CONSERVATION_VIOLATION


def test_tx_id_set_folds_recent_ids():
    ids = TxIdSet().union(["a", "b"])
    assert "a" in ids and "c" not in ids
    assert len(ids.base) == 0
    big = ids.union(f"tx{i}" for i in range(TxIdSet.FOLD_AT))
    assert len(big) == TxIdSet.FOLD_AT + 2
    assert len(big.recent) == 0
    assert "a" in big and "tx7" in big
