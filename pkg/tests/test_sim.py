import dataclasses
import json

import pytest
from conftest import small_config
from scipy.stats import binom

from powpos_lab.chain import COIN, Transaction, TxKind
from powpos_lab.chain.serialize import block_hash
from powpos_lab.consensus import write_chain
from powpos_lab.hashing import meets_target
from powpos_lab.sim import (
    AttackPhase,
    ConsensusMode,
    EventType,
    MiningMode,
    NetworkShape,
    Outcome,
    ScenarioKind,
    Simulation,
    SweepRunner,
    double_spend_grid,
    nothing_at_stake_config,
    parse_event,
    run,
    scenario_double_spend,
    scenario_nothing_at_stake,
    scenario_stakepool_failure,
    scenario_strip_mine,
    success_rate,
)
from powpos_lab.sim.engine import SNAPSHOT_DEPTH
from powpos_lab.sim.scenarios import double_spend_config


def phases(trace):
    return [e.phase for e in trace if e.event_type is EventType.ATTACK]


def test_same_seed_same_trace(sim_config):
    first = run(sim_config)
    second = run(sim_config)
    assert [e.to_dict() for e in first.trace] == [e.to_dict() for e in second.trace]
    assert first.report.to_dict() == second.report.to_dict()


def test_different_seed_different_trace(sim_config):
    first = run(sim_config)
    other = run(sim_config.with_seed(1))
    assert [e.to_dict() for e in first.trace] != [e.to_dict() for e in other.trace]


def test_honest_run_completes(sim_config):
    result = run(sim_config)
    report = result.report
    assert report.outcome is Outcome.COMPLETED
    assert report.best_height >= sim_config.run_blocks
    assert len(report.blocks) == report.best_height
    assert [b.height for b in report.blocks] == list(range(1, report.best_height + 1))
    assert sum(report.best_chain_blocks.values()) == report.best_height
    json.dumps(report.to_dict())


def test_ledger_is_conserved_at_the_tip(sim_config):
    result = run(sim_config)
    index = result.index
    state = index.state_of(index.best_tip)
    state.check_conservation(sim_config.params)
    assert state.height == index.height


def test_exported_chain_matches_the_report(sim_config, tmp_path):
    result = run(sim_config)
    path = tmp_path / "chain.ndjson"
    written = write_chain(result.index, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert written == len(lines) == result.report.best_height + 1


def test_trace_lines_parse_back(sim_config):
    result = run(sim_config)
    assert result.trace
    for event in result.trace:
        assert parse_event(event.to_json()) == event


def test_no_stakers_stalls():
    config = small_config(network=NetworkShape(honest_miners=2, stakers=0, tickets=0))
    result = run(config)
    assert result.report.outcome is Outcome.STALLED
    assert result.report.best_height == 0
    stalls = [e for e in result.trace if e.event_type is EventType.STALL]
    assert stalls and stalls[-1].aborted


def test_pure_pos_produces_a_block_every_slot():
    config = small_config(mode=ConsensusMode.PURE_POS, run_blocks=20)
    report = run(config).report
    assert report.outcome is Outcome.COMPLETED
    assert all(b.interval == config.params.target_block_time for b in report.blocks)


def test_roster_caches_stay_bounded():
    config = small_config(run_blocks=3 * SNAPSHOT_DEPTH, trace_deliveries=False)
    sim = Simulation(config)
    assert sim.run().report.outcome is Outcome.COMPLETED
    floor = sim.index.height - 2 * SNAPSHOT_DEPTH
    assert all(sim.index.entry(h).height >= floor for h in sim._rosters)
    assert all(key[0] in sim._rosters for key in sim._quorum)


def test_real_mining_grinds_valid_nonces():
    config = small_config(mining=MiningMode.REAL, real_work=256, run_blocks=10)
    result = run(config)
    assert result.report.outcome is Outcome.COMPLETED
    index = result.index
    headers = [index.entry(h).block.header for h in index.best_chain()[1:]]
    assert len(headers) >= 10
    assert all(meets_target(block_hash(h, config.params.hash_algo), h.target) for h in headers)
    assert headers[0].target == (1 << 256) // 256


def test_offline_stakers_leave_missed_votes():
    network = NetworkShape(honest_miners=2, stakers=16, tickets=480, online=0.8)
    config = small_config(network=network)
    report = run(config).report
    assert 0 < report.missed_vote_rate < 0.5


# Scripted attacks


def sweep(configs):
    return SweepRunner(configs, workers=4).run_sync()


def double_spend_rate(config, stake_share, multiplier, seeds):
    cell = double_spend_config(config, stake_share, multiplier)
    return success_rate(sweep([cell.with_seed(s) for s in seeds]))


def test_minority_attacker_gives_up():
    config = small_config(run_blocks=120)
    for seed in range(4):
        report = scenario_double_spend(config.with_seed(seed), 0.05, 10.0)
        assert report.outcome is Outcome.FAILED
        assert report.metrics["fork_released"] is False


def test_give_up_is_traced():
    config = small_config(run_blocks=120)
    result = run(double_spend_config(config, 0.05, 10.0))
    assert AttackPhase.STARTED in phases(result.trace)
    assert phases(result.trace)[-1] is AttackPhase.GAVE_UP


def test_majority_attacker_sees_the_payment_confirm():
    config = small_config(run_blocks=150)
    reports = [scenario_double_spend(config.with_seed(s), 0.6, 1.0) for s in range(4)]
    for report in reports:
        assert report.metrics["pay_height"] is not None
        assert report.metrics["goods_released"] is True
    assert success_rate(reports) >= 0.5


def test_reorg_returns_dropped_transfers_to_the_mempool():
    network = NetworkShape(honest_miners=2, stakers=16, tickets=480, spare_balance=10 * COIN)
    sim = Simulation(small_config(network=network))
    genesis = sim.index.genesis_hash
    miner, rival = sim.node("miner-0"), sim.node("miner-1")
    payment = Transaction(
        id="pay", kind=TxKind.TRANSFER, sender="staker-0", recipient="staker-1", amount=COIN
    )
    sim.mempool.append(payment)

    def mine(builder, parent, txs=None):
        sim.now += 600
        block = sim.build_block(sim.index, parent, builder, txs)
        sim._after_public_insert(sim.index.extend_chain(block))
        return block_hash(block.header, sim.params.hash_algo)

    paid = mine(miner, genesis)
    assert payment in sim.index.entry(paid).block.transactions
    assert payment not in sim.mempool
    side = mine(rival, genesis, [])
    mine(rival, side, [])
    assert not sim.index.is_on_best_chain(paid)
    assert sim.mempool.count(payment) == 1


@pytest.mark.slow
def test_double_spend_over_a_hundred_seeds():
    config = small_config(run_blocks=150)
    seeds = range(100)
    assert double_spend_rate(config, 0.6, 1.0, seeds) > 0.5
    assert double_spend_rate(config, 0.05, 10.0, seeds) < 0.05


@pytest.mark.slow
def test_double_spend_success_increases_strictly_with_stake():
    config = small_config(run_blocks=150)
    rates = [double_spend_rate(config, f, 1.0, range(100)) for f in (0.4, 0.5, 0.6)]
    assert rates[0] < rates[1] < rates[2]
    assert rates[0] > 0.0


@pytest.mark.slow
def test_double_spend_success_grows_with_stake_and_hash():
    config = small_config(run_blocks=150)
    shares = [0.05, 0.3, 0.6]
    multipliers = [0.1, 1.0, 10.0]
    grid = double_spend_grid(config, shares, multipliers, seeds=range(100), workers=4)
    for r in multipliers:
        column = [grid[(f, r)] for f in shares]
        assert all(b >= a for a, b in zip(column, column[1:]))
    for f in shares:
        row = [grid[(f, r)] for r in multipliers]
        assert all(b >= a for a, b in zip(row, row[1:]))
    assert grid[(0.05, 0.1)] == 0.0
    assert grid[(0.6, 10.0)] > 0.9


def _strip_mine_config():
    base = small_config()
    params = base.params.with_overrides({"retarget_interval": 1000})
    return dataclasses.replace(base, params=params)


@pytest.mark.slow
@pytest.mark.parametrize("multiplier, slowdown", [(9.0, 4.0), (1.0, 2.0)])
def test_strip_mine_slows_the_next_window(multiplier, slowdown):
    config = _strip_mine_config()
    report = scenario_strip_mine(config, multiplier)
    block_time = config.params.target_block_time
    assert report.metrics["quit_height"] == 1000
    assert report.metrics["pre_quit_mean_interval"] == pytest.approx(
        block_time / (1 + multiplier), rel=0.15
    )
    assert report.metrics["post_quit_mean_interval"] == pytest.approx(
        slowdown * block_time, rel=0.15
    )


def _nas_configs(greedy, *, mode=None, hash_multiplier=None):
    config = small_config(run_blocks=60)
    if hash_multiplier is not None:
        config = dataclasses.replace(
            config, attack=dataclasses.replace(config.attack, hash_multiplier=hash_multiplier)
        )
    cell = nothing_at_stake_config(config, greedy, stake_share=0.01, mode=mode)
    return [cell.with_seed(s) for s in range(100)]


def test_nothing_at_stake_fork_grows_on_greedy_votes():
    config = small_config(run_blocks=60)
    reports = [
        scenario_nothing_at_stake(
            config.with_seed(s), 1.0, stake_share=0.01, mode=ConsensusMode.PURE_POS
        )
        for s in range(4)
    ]
    assert success_rate(reports) >= 0.5
    assert all(r.metrics["multi_fork_votes"] > 0 for r in reports)


@pytest.mark.slow
def test_nothing_at_stake_needs_pure_pos():
    pure = sweep(_nas_configs(1.0, mode=ConsensusMode.PURE_POS))
    hybrid = sweep(_nas_configs(1.0, hash_multiplier=0.001))
    assert success_rate(pure) > 0.5
    assert success_rate(hybrid) < 0.02


@pytest.mark.slow
def test_without_greedy_voters_no_vote_lands_on_two_forks():
    reports = sweep(_nas_configs(0.0, mode=ConsensusMode.PURE_POS))
    assert all(r.metrics["multi_fork_votes"] == 0 for r in reports)
    assert success_rate(reports) == 0.0


def test_whole_stake_in_an_offline_pool_stalls_the_chain():
    report = scenario_stakepool_failure(small_config(), 1.0, 10)
    assert report.outcome is Outcome.STALLED
    assert report.best_height == 9
    assert report.metrics["blocks_after"] == 0
    assert report.stall_episodes >= 1


def test_offline_pool_holding_most_stake_leaves_binomial_quorums():
    config = small_config(run_blocks=30)
    reports = [scenario_stakepool_failure(config.with_seed(s), 0.8, 20) for s in range(4)]
    blocks = sum(r.metrics["blocks_after"] for r in reports)
    missed = sum(r.metrics["missed_rate_after"] * r.metrics["blocks_after"] for r in reports)
    assert blocks >= 4
    # Surviving blocks had at least 3 of 5 votes from the 20% still online
    online = binom(5, 0.2)
    expected = sum((5 - k) * online.pmf(k) for k in range(3, 6)) / (5 * online.sf(2))
    assert missed / blocks == pytest.approx(expected, abs=0.08)
    assert all(r.stall_episodes > 0 for r in reports)


@pytest.mark.slow
def test_stakepool_outage_raises_missed_votes():
    config = small_config(run_blocks=60)
    report = scenario_stakepool_failure(config, 0.5, 20)
    assert report.metrics["missed_rate_before"] == 0.0
    assert report.metrics["missed_rate_after"] > 0.2


@pytest.mark.slow
def test_block_interval_converges_to_target():
    base = small_config(run_blocks=10_000, trace_deliveries=False)
    params = base.params.with_overrides({"retarget_interval": 200})
    report = run(dataclasses.replace(base, params=params)).report
    assert report.outcome is Outcome.COMPLETED
    assert len(report.window_intervals) >= 50
    assert report.mean_interval == pytest.approx(params.target_block_time, rel=0.05)


def test_scenario_kind_is_set_by_helpers(sim_config):
    report = scenario_stakepool_failure(sim_config, 0.25, None)
    assert report.scenario == ScenarioKind.STAKEPOOL_FAILURE.name
    assert report.metrics["missed_rate_before"] == 0.0
