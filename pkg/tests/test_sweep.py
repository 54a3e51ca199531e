import time

import pytest
from conftest import small_config

from powpos_lab.sim import Outcome, ScenarioReport, SweepError, SweepRunner, aggregate_csv


def fake_report(config):
    # Later seeds finish first
    time.sleep(0.01 * (3 - config.seed % 3))
    if config.seed == 13:
        raise RuntimeError("boom")
    return ScenarioReport(
        scenario=config.kind.name,
        seed=config.seed,
        outcome=Outcome.COMPLETED,
        best_height=config.run_blocks,
        end_time=0.0,
        blocks_found={},
        best_chain_blocks={},
        reorg_depths={},
        window_intervals=[],
        mean_interval=600.0,
        missed_vote_rate=0.0,
        stall_episodes=0,
        metrics={"seed_squared": config.seed**2},
    )


@pytest.fixture
def fake_runs(monkeypatch):
    monkeypatch.setattr("powpos_lab.sim.sweep.run_report", fake_report)


def configs(seeds):
    base = small_config(run_blocks=5)
    return [base.with_seed(s) for s in seeds]


def test_results_follow_config_order(fake_runs):
    seen = []
    reports = SweepRunner(configs([0, 1, 2, 3]), workers=4, on_report=seen.append).run_sync()
    assert [r.seed for r in reports] == [0, 1, 2, 3]
    assert sorted(r.seed for r in seen) == [0, 1, 2, 3]


def test_fail_fast_propagates_the_first_failure(fake_runs):
    with pytest.raises(ExceptionGroup) as info:
        SweepRunner(configs([0, 13, 2])).run_sync()
    assert info.group_contains(RuntimeError, match="boom")


def test_collect_mode_attempts_every_run(fake_runs):
    seen = []
    runner = SweepRunner(configs([0, 13, 2]), fail_fast=False, on_report=seen.append)
    with pytest.raises(SweepError) as info:
        runner.run_sync()
    assert list(info.value.failures) == [1]
    assert isinstance(info.value.failures[1], RuntimeError)
    assert sorted(r.seed for r in seen) == [0, 2]


def test_aggregate_has_one_row_per_seed(fake_runs):
    reports = SweepRunner(configs([2, 0, 1])).run_sync()
    lines = aggregate_csv(reports).splitlines()
    assert lines[0].startswith("seed,outcome,best_height")
    assert lines[0].endswith("seed_squared")
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "2"]


def test_workers_must_be_positive():
    with pytest.raises(ValueError):
        SweepRunner([], workers=0)


def test_worker_processes_match_serial_runs():
    cfgs = configs([0, 1, 2])
    serial = SweepRunner(cfgs).run_sync()
    parallel = SweepRunner(cfgs, workers=2).run_sync()
    assert [r.to_dict() for r in parallel] == [r.to_dict() for r in serial]
