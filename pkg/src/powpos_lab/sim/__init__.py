from powpos_lab.sim.config import (
    AttackKnobs,
    ConfigError,
    ConsensusMode,
    LatencyKind,
    LatencyModel,
    MiningMode,
    NetworkShape,
    NodeSpec,
    ScenarioConfig,
    ScenarioKind,
    Strategy,
    config_from_dict,
    load_config,
    parse_kind,
)
from powpos_lab.sim.engine import Simulation, SimulationResult, run
from powpos_lab.sim.events import AttackPhase, BaseEvent, EventType, parse_event
from powpos_lab.sim.report import (
    BlockRecord,
    Outcome,
    ScenarioReport,
    aggregate_csv,
    blocks_csv,
    success_rate,
    write_report,
    write_trace,
)
from powpos_lab.sim.scenarios import (
    double_spend_grid,
    nothing_at_stake_config,
    run_report,
    scenario_double_spend,
    scenario_nothing_at_stake,
    scenario_stakepool_failure,
    scenario_strip_mine,
)
from powpos_lab.sim.sweep import SweepError, SweepRunner

__all__ = [
    "AttackKnobs",
    "ConfigError",
    "ConsensusMode",
    "LatencyKind",
    "LatencyModel",
    "MiningMode",
    "NetworkShape",
    "NodeSpec",
    "ScenarioConfig",
    "ScenarioKind",
    "Strategy",
    "config_from_dict",
    "load_config",
    "parse_kind",
    "Simulation",
    "SimulationResult",
    "AttackPhase",
    "BaseEvent",
    "EventType",
    "parse_event",
    "BlockRecord",
    "Outcome",
    "ScenarioReport",
    "aggregate_csv",
    "blocks_csv",
    "success_rate",
    "write_report",
    "write_trace",
    "double_spend_grid",
    "nothing_at_stake_config",
    "run",
    "run_report",
    "scenario_double_spend",
    "scenario_nothing_at_stake",
    "scenario_stakepool_failure",
    "scenario_strip_mine",
    "SweepError",
    "SweepRunner",
]
