"""Entry points for the scripted scenarios.

Each helper takes a base configuration, fixes the scenario kind and its knobs,
and runs a single seed. Sweeps over seeds live in `powpos_lab.sim.sweep`.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable, Sequence

from powpos_lab.sim.config import (
    ConsensusMode,
    ScenarioConfig,
    ScenarioKind,
)
from powpos_lab.sim.engine import run
from powpos_lab.sim.report import ScenarioReport, success_rate


def run_report(config: ScenarioConfig) -> ScenarioReport:
    return run(config).report


def _with_attack(config: ScenarioConfig, kind: ScenarioKind, **knobs) -> ScenarioConfig:
    return dataclasses.replace(
        config, kind=kind, attack=dataclasses.replace(config.attack, **knobs)
    )


def double_spend_config(
    config: ScenarioConfig, stake_share: float, hash_multiplier: float
) -> ScenarioConfig:
    return _with_attack(
        config,
        ScenarioKind.DOUBLE_SPEND,
        stake_share=stake_share,
        hash_multiplier=hash_multiplier,
    )


def scenario_double_spend(
    config: ScenarioConfig, stake_share: float, hash_multiplier: float
) -> ScenarioReport:
    """Private-fork double spend by an attacker holding `stake_share` of the tickets
    and `hash_multiplier` times the honest hashpower."""
    return run_report(double_spend_config(config, stake_share, hash_multiplier))


def scenario_strip_mine(
    config: ScenarioConfig, hash_multiplier: float, quit_height: int | None = None
) -> ScenarioReport:
    """Attacker mines openly, then quits at `quit_height` (default: the first retarget).

    The run is extended so a full window after the quit is observed.
    """
    quit_at = quit_height if quit_height is not None else config.params.retarget_interval
    cfg = _with_attack(
        config,
        ScenarioKind.STRIP_MINE,
        hash_multiplier=hash_multiplier,
        quit_height=quit_at,
    )
    horizon = quit_at + config.params.retarget_interval - 1
    if cfg.run_blocks < horizon:
        cfg = dataclasses.replace(cfg, run_blocks=horizon)
    return run_report(cfg)


def scenario_stakepool_failure(
    config: ScenarioConfig, pool_share: float, offline_height: int | None
) -> ScenarioReport:
    """A stakepool holding `pool_share` of the tickets goes offline at `offline_height`."""
    return run_report(
        _with_attack(
            config,
            ScenarioKind.STAKEPOOL_FAILURE,
            pool_share=pool_share,
            offline_height=offline_height,
        )
    )


def nothing_at_stake_config(
    config: ScenarioConfig,
    greedy_fraction: float,
    *,
    stake_share: float | None = None,
    mode: ConsensusMode | None = None,
) -> ScenarioConfig:
    knobs = {"greedy_fraction": greedy_fraction}
    if stake_share is not None:
        knobs["stake_share"] = stake_share
    cfg = _with_attack(config, ScenarioKind.NOTHING_AT_STAKE, **knobs)
    if mode is not None:
        cfg = dataclasses.replace(cfg, mode=mode)
    return cfg


def scenario_nothing_at_stake(
    config: ScenarioConfig,
    greedy_fraction: float,
    *,
    stake_share: float | None = None,
    mode: ConsensusMode | None = None,
) -> ScenarioReport:
    """A small-stake attacker keeps a public fork alive with greedy multi-fork votes."""
    return run_report(
        nothing_at_stake_config(config, greedy_fraction, stake_share=stake_share, mode=mode)
    )


def seed_configs(config: ScenarioConfig, seeds: Iterable[int]) -> list[ScenarioConfig]:
    return [config.with_seed(seed) for seed in seeds]


def double_spend_grid(
    config: ScenarioConfig,
    stake_shares: Sequence[float],
    hash_multipliers: Sequence[float],
    seeds: Sequence[int],
    *,
    workers: int = 1,
) -> dict[tuple[float, float], float]:
    """Success rate of the double spend for every (stake share, multiplier) cell."""
    from powpos_lab.sim.sweep import SweepRunner

    cells = [(f, r) for f in stake_shares for r in hash_multipliers]
    configs = [
        cfg
        for f, r in cells
        for cfg in seed_configs(double_spend_config(config, f, r), seeds)
    ]
    reports = SweepRunner(configs, workers=workers).run_sync()
    per_cell = len(seeds)
    return {
        cell: success_rate(reports[i * per_cell : (i + 1) * per_cell])
        for i, cell in enumerate(cells)
    }
