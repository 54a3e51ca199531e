import dataclasses
import io
import itertools
import math

import numpy as np
import pytest
from conftest import ChainBuilder, make_stakes, reseal

from powpos_lab.chain import COIN, Transaction, TxKind, Vote
from powpos_lab.chain.ledger import apply_block
from powpos_lab.consensus import (
    ChainIndex,
    RewardError,
    UnknownParentError,
    ValidationError,
    ValidationFailure,
    distribute_reward,
    read_chain,
    write_chain,
)
from powpos_lab.hashing import MAX_TARGET


def transfer(tx_id, recipient, amount, sender="alice"):
    return Transaction(
        id=tx_id, kind=TxKind.TRANSFER, sender=sender, recipient=recipient, amount=amount
    )


def rejected(chain: ChainBuilder, block, reason: ValidationFailure):
    best = chain.tip
    with pytest.raises(ValidationError) as info:
        chain.index.extend_chain(block)
    assert info.value.reason is reason
    assert chain.tip == best


# Rewards


def test_reward_split_with_full_quorum(pai):
    split = distribute_reward(1500, 5, pai)
    assert (split.miner, split.per_voter, split.dev, split.burned) == (900, 90, 150, 0)
    assert split.withheld == 0


def test_reward_split_with_four_votes(pai):
    split = distribute_reward(1500, 4, pai)
    assert (split.miner, split.per_voter, split.dev, split.burned) == (720, 90, 150, 90)
    assert split.withheld == 180


def test_reward_split_accounts_for_every_unit(pai):
    rewards = [0, 1, 7, 99, 1501, 1500 * COIN - 1, 1500 * COIN, 3_119_582_664]
    for reward, votes in itertools.product(rewards, range(3, 6)):
        split = distribute_reward(reward, votes, pai)
        assert split.total(votes) == reward
        assert split.withheld == math.floor(reward * pai.split_miner) - split.miner
        assert min(split.miner, split.per_voter, split.dev, split.burned) >= 0


@pytest.mark.parametrize("votes", [0, 2, 6])
def test_reward_needs_a_quorum(pai, votes):
    with pytest.raises(RewardError):
        distribute_reward(1500, votes, pai)


# Fork choice


def test_extending_the_tip(chain):
    report = chain.index.extend_chain(chain.child())
    assert report is None
    assert chain.index.height == 1
    assert len(chain.index.best_chain()) == 2


def test_first_seen_wins_a_tie_and_more_work_reorgs(chain):
    genesis = chain.tip
    a1 = chain.extend(genesis, miner="miner-a")
    b1 = chain.extend(genesis, miner="miner-b")
    assert chain.tip == a1

    b2 = chain.child(b1, miner="miner-b")
    report = chain.index.extend_chain(b2)
    assert report is not None
    assert report.depth == 1
    assert report.rolled_back == (a1,)
    assert report.applied == (b1, chain.hash_of(b2))
    assert report.fork_point == genesis
    assert chain.index.best_chain() == [genesis, b1, chain.hash_of(b2)]


def test_ledger_after_reorg_equals_replay(chain):
    genesis = chain.tip
    a1 = chain.extend(genesis, miner="miner-a", txs=[transfer("pay-bob", "bob", 10 * COIN)])
    chain.extend(a1, miner="miner-a")
    b1 = chain.extend(genesis, miner="miner-b", txs=[transfer("pay-carol", "carol", 20 * COIN)])
    chain.grow(2, b1, miner="miner-b")
    assert chain.index.height == 3

    replayed = chain.genesis_state
    for block in chain.index.blocks(chain.index.best_chain()[1:]):
        replayed = apply_block(replayed, block, chain.params)
    state = chain.state()
    assert state.balances == replayed.balances
    assert (state.minted, state.burned, state.dev_fund) == (
        replayed.minted,
        replayed.burned,
        replayed.dev_fund,
    )
    assert state.pool.live_ids == replayed.pool.live_ids
    assert state.balance("bob") == 0
    assert state.balance("carol") == 20 * COIN


def test_orphans_connect_when_the_parent_arrives(chain):
    parent = chain.child()
    child_hash = chain.hash_of(parent)
    # Build the grandchild on a scratch index that already holds the parent
    stakes = make_stakes({f"staker-{i}": 8 for i in range(8)})
    scratch = ChainBuilder(chain.params, {"alice": 1000 * COIN}, stakes)
    scratch.index.extend_chain(parent)
    grandchild = scratch.child(child_hash)

    with pytest.raises(UnknownParentError) as info:
        chain.index.extend_chain(grandchild)
    assert info.value.parent_hash == child_hash
    assert chain.index.orphan_count == 1

    chain.index.extend_chain(parent)
    assert chain.index.orphan_count == 0
    assert chain.index.height == 2
    assert chain.tip == chain.hash_of(grandchild)


# Validation


def test_vote_from_unselected_entry(chain):
    view = chain.index.parent_view(chain.tip)
    outsider = next(i for i in view.child_pool.live_ids if i not in view.selected)
    block = chain.child()
    first = block.votes[0]
    forged = Vote(entry_id=outsider, voter=outsider.split(":")[0], candidate=first.candidate)
    block = reseal(dataclasses.replace(block, votes=(forged, *block.votes[1:])), chain.params)
    rejected(chain, block, ValidationFailure.UNAUTHORIZED_VOTER)


def test_vote_signed_by_a_stranger(chain):
    block = chain.child()
    first = block.votes[0]
    forged = dataclasses.replace(first, voter="mallory")
    block = reseal(dataclasses.replace(block, votes=(forged, *block.votes[1:])), chain.params)
    rejected(chain, block, ValidationFailure.UNAUTHORIZED_VOTER)


def test_branch_with_short_quorum_tip_is_rejected(chain):
    genesis = chain.tip
    chain.grow(2, genesis, miner="miner-a")
    b1 = chain.extend(genesis, miner="miner-b")
    b2 = chain.extend(b1, miner="miner-b")
    full = chain.child(b2, miner="miner-b")
    short = dataclasses.replace(
        full,
        votes=full.votes[:2],
        missed=full.missed + tuple(v.entry_id for v in full.votes[2:]),
    )
    rejected(chain, reseal(short, chain.params), ValidationFailure.INSUFFICIENT_VOTES)
    assert chain.index.height == 2
    assert not chain.index.is_on_best_chain(b2)


def test_invalid_blocks_never_become_best_in_a_random_tree(chain):
    rng = np.random.default_rng(23)
    index = chain.index
    valid = [index.genesis_hash]
    invalid = set()
    for step in range(40):
        parents = [h for h in valid if index.entry(h).height < 8]
        parent = parents[int(rng.integers(len(parents)))]
        block = chain.child(parent, miner=f"miner-{step}")
        if rng.random() < 0.4:
            coinbase = dataclasses.replace(
                block.coinbase, miner_amount=block.coinbase.miner_amount + 1
            )
            block = reseal(dataclasses.replace(block, coinbase=coinbase), chain.params)
            with pytest.raises(ValidationError):
                index.extend_chain(block)
            invalid.add(chain.hash_of(block))
        else:
            index.extend_chain(block)
            valid.append(chain.hash_of(block))
        assert index.best_tip not in invalid
        assert index.best.work == max(index.entry(h).work for h in valid)
        assert not invalid.intersection(index.best_chain())
    assert invalid
    assert all(h not in index for h in invalid)


def test_overspending_block(chain):
    block = chain.child(txs=[transfer("big", "bob", 5000 * COIN)])
    rejected(chain, block, ValidationFailure.BAD_TX)


def test_inflated_coinbase(chain):
    block = chain.child()
    coinbase = dataclasses.replace(block.coinbase, miner_amount=block.coinbase.miner_amount + 1)
    block = reseal(dataclasses.replace(block, coinbase=coinbase), chain.params)
    rejected(chain, block, ValidationFailure.BAD_COINBASE)


def test_wrong_height(chain):
    block = chain.child()
    header = dataclasses.replace(block.header, height=2)
    rejected(chain, dataclasses.replace(block, header=header), ValidationFailure.BAD_LINKAGE)


def test_wrong_target(chain):
    block = chain.child()
    header = dataclasses.replace(block.header, target=MAX_TARGET - 1)
    rejected(chain, dataclasses.replace(block, header=header), ValidationFailure.BAD_POW)


def test_body_not_matching_commitment(chain):
    block = chain.child()
    tampered = dataclasses.replace(block, transactions=(transfer("sneaky", "bob", COIN),))
    rejected(chain, tampered, ValidationFailure.BAD_COMMITMENT)


def test_insufficient_work(params):
    stakes = make_stakes({f"staker-{i}": 8 for i in range(8)})
    strict = ChainBuilder(params, {}, stakes, fixed_target=1)
    block = strict.child()
    # Digest is essentially never below a target of 1
    rejected(strict, block, ValidationFailure.BAD_POW)


# Snapshots, branches, export


def test_pruned_states_are_rebuilt(params):
    stakes = make_stakes({f"staker-{i}": 8 for i in range(8)})
    builder = ChainBuilder(
        params, {"alice": 100 * COIN}, stakes, snapshot_depth=4, checkpoint_interval=4
    )
    hashes = builder.grow(12)
    index = builder.index
    assert index.entry(hashes[1]).state is None
    assert index.entry(hashes[3]).state is not None
    replayed = builder.genesis_state
    for block in index.blocks(hashes[:2]):
        replayed = apply_block(replayed, block, params)
    assert index.state_of(hashes[1]) == replayed


def test_private_branch_stays_invisible(chain):
    base = chain.grow(2)[-1]
    branch = chain.index.branch_from(base)
    private_block = chain.child(base, miner="hidden")
    branch.extend_chain(private_block)
    hidden = chain.hash_of(private_block)
    assert hidden in branch and branch.height == 3
    assert hidden not in chain.index
    assert chain.index.height == 2


def test_export_has_one_line_per_best_chain_block(chain):
    chain.grow(5)
    buf = io.StringIO()
    written = write_chain(chain.index, buf)
    lines = buf.getvalue().splitlines()
    assert written == len(lines) == chain.index.height + 1
    assert read_chain(lines) == chain.index.blocks(chain.index.best_chain())


def test_index_options_are_validated(params):
    builder = ChainBuilder(params)
    with pytest.raises(ValueError):
        ChainIndex(builder.genesis, builder.genesis_state, params, snapshot_depth=0)
