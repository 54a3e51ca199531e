"""Scenario configuration: TOML or JSON files resolved into frozen dataclasses.

The schema is documented in docs/config.md. `ScenarioConfig.to_dict()` emits the
fully resolved configuration; loading that dump yields an equal config.
"""

from __future__ import annotations

import dataclasses
import json
import tomllib
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from powpos_lab.chain.params import ChainParams, ParamsError, coins, format_coins, preset_params

ScenarioKind = Enum(
    "ScenarioKind",
    ["HONEST", "DOUBLE_SPEND", "STRIP_MINE", "NOTHING_AT_STAKE", "STAKEPOOL_FAILURE"],
)

Strategy = Enum(
    "Strategy",
    ["HONEST", "PRIVATE_FORK_DOUBLE_SPEND", "STRIP_MINE", "NOTHING_AT_STAKE"],
)

ConsensusMode = Enum("ConsensusMode", ["HYBRID", "PURE_POS"])

MiningMode = Enum("MiningMode", ["STOCHASTIC", "REAL"])

LatencyKind = Enum("LatencyKind", ["FIXED", "UNIFORM"])

_KIND_ALIASES = {
    "honest": ScenarioKind.HONEST,
    "double-spend": ScenarioKind.DOUBLE_SPEND,
    "strip-mine": ScenarioKind.STRIP_MINE,
    "nas": ScenarioKind.NOTHING_AT_STAKE,
    "nothing-at-stake": ScenarioKind.NOTHING_AT_STAKE,
    "stakepool": ScenarioKind.STAKEPOOL_FAILURE,
}


class ConfigError(ValueError):
    """Raised when a scenario configuration does not match the schema."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


def parse_kind(value: str | ScenarioKind) -> ScenarioKind:
    if isinstance(value, ScenarioKind):
        return value
    name = str(value).strip()
    kind = _KIND_ALIASES.get(name.lower())
    if kind is not None:
        return kind
    try:
        return ScenarioKind[name.upper().replace("-", "_")]
    except KeyError:
        raise ConfigError(
            f"unknown scenario '{value}'; expected one of {', '.join(_KIND_ALIASES)}",
            "scenario.kind",
        ) from None


def kind_label(kind: ScenarioKind) -> str:
    return next(k for k, v in _KIND_ALIASES.items() if v is kind)


def _enum(enum_cls: type[Enum], value: Any, key: str) -> Any:
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls[str(value).upper().replace("-", "_")]
    except KeyError:
        choices = ", ".join(m.name.lower() for m in enum_cls)
        raise ConfigError(f"invalid value {value!r}; expected one of {choices}", key) from None


@dataclass(frozen=True, slots=True)
class LatencyModel:
    kind: LatencyKind = LatencyKind.FIXED
    low: float = 2.0
    high: float = 2.0

    def __post_init__(self) -> None:
        if self.low < 0 or self.high < self.low:
            raise ConfigError("require 0 <= low <= high", "latency")

    def sample(self, rng: np.random.Generator) -> float:
        match self.kind:
            case LatencyKind.FIXED:
                return self.low
            case LatencyKind.UNIFORM:
                return float(rng.uniform(self.low, self.high))
            case _:
                raise ConfigError(f"unsupported latency kind {self.kind}", "latency.kind")


@dataclass(frozen=True, slots=True)
class NodeSpec:
    id: str
    miner: bool = False
    staker: bool = False
    stakepool: bool = False
    hashpower: float = 0.0
    stake: int = 0
    balance: int = 0
    online: float = 1.0
    adversarial: bool = False
    strategy: Strategy = Strategy.HONEST
    delegate: str | None = None

    def __post_init__(self) -> None:
        if self.hashpower < 0:
            raise ConfigError(f"node {self.id}: hashpower must be >= 0", "nodes.hashpower")
        if not 0.0 <= self.online <= 1.0:
            raise ConfigError(f"node {self.id}: online must be in [0, 1]", "nodes.online")
        if self.stake < 0 or self.balance < 0:
            raise ConfigError(f"node {self.id}: negative coin amount", "nodes.stake")

    @property
    def greedy(self) -> bool:
        return self.strategy is Strategy.NOTHING_AT_STAKE


@dataclass(frozen=True, slots=True)
class NetworkShape:
    """Generated honest population."""

    honest_miners: int = 4
    honest_hashpower: float = 1.0e6
    stakers: int = 64
    tickets: int = 4096
    ticket_price: int = 100 * 10**8
    online: float = 1.0
    spare_balance: int = 0

    def __post_init__(self) -> None:
        if self.honest_miners < 0 or self.stakers < 0 or self.tickets < 0:
            raise ConfigError("counts must be >= 0", "network")
        if self.honest_miners and self.honest_hashpower <= 0:
            raise ConfigError("honest_hashpower must be positive", "network.honest_hashpower")
        if self.ticket_price <= 0:
            raise ConfigError("ticket_price must be positive", "network.ticket_price")
        if not 0.0 <= self.online <= 1.0:
            raise ConfigError("online must be in [0, 1]", "network.online")


@dataclass(frozen=True, slots=True)
class AttackKnobs:
    stake_share: float = 0.0
    hash_multiplier: float = 0.0
    attack_height: int = 10
    amount: int = 1000 * 10**8
    give_up_deficit: int = 12
    quit_height: int | None = None
    pool_share: float = 0.0
    offline_height: int | None = None
    greedy_fraction: float = 0.0

    def __post_init__(self) -> None:
        for name in ("stake_share", "pool_share", "greedy_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError("must be in [0, 1]", f"attack.{name}")
        if self.hash_multiplier < 0:
            raise ConfigError("must be >= 0", "attack.hash_multiplier")
        if self.attack_height < 1:
            raise ConfigError("must be >= 1", "attack.attack_height")
        if self.amount <= 0:
            raise ConfigError("must be positive", "attack.amount")
        if self.give_up_deficit < 1:
            raise ConfigError("must be >= 1", "attack.give_up_deficit")


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    kind: ScenarioKind = ScenarioKind.HONEST
    preset: str = "PROJECT_PAI"
    params: ChainParams = field(default_factory=lambda: preset_params("PROJECT_PAI"))
    seed: int = 0
    run_blocks: int = 200
    n_conf: int = 6
    mode: ConsensusMode = ConsensusMode.HYBRID
    mining: MiningMode = MiningMode.STOCHASTIC
    # Expected hashes per block at the initial target when mining is real
    real_work: int = 4096
    stall_horizon: float = 10.0
    stall_abort: float = 60.0
    staking_fee: int = 10**8
    mempool_max: int = 50
    trace_deliveries: bool = True
    latency: LatencyModel = field(default_factory=LatencyModel)
    network: NetworkShape = field(default_factory=NetworkShape)
    nodes: tuple[NodeSpec, ...] = ()
    attack: AttackKnobs = field(default_factory=AttackKnobs)

    def __post_init__(self) -> None:
        if self.run_blocks < 1:
            raise ConfigError("must be >= 1", "scenario.run_blocks")
        if self.n_conf < 1:
            raise ConfigError("must be >= 1", "scenario.n_conf")
        if self.real_work < 1:
            raise ConfigError("must be >= 1", "scenario.real_work")
        if self.stall_horizon <= 0 or self.stall_abort < self.stall_horizon:
            raise ConfigError(
                "require 0 < stall_horizon <= stall_abort", "scenario.stall_horizon"
            )
        if self.staking_fee < 0:
            raise ConfigError("must be >= 0", "scenario.staking_fee")
        if self.mempool_max < 0:
            raise ConfigError("must be >= 0", "scenario.mempool_max")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate node ids", "nodes.id")

    @classmethod
    def for_preset(cls, preset: str = "PROJECT_PAI", **changes: Any) -> ScenarioConfig:
        name = preset_params_name(preset)
        return cls(preset=name, params=preset_params(name), **changes)

    def with_seed(self, seed: int) -> ScenarioConfig:
        return dataclasses.replace(self, seed=seed)

    def replace(self, **changes: Any) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": {
                "kind": kind_label(self.kind),
                "preset": self.preset,
                "seed": self.seed,
                "run_blocks": self.run_blocks,
                "n_conf": self.n_conf,
                "mode": self.mode.name.lower(),
                "mining": self.mining.name.lower(),
                "real_work": self.real_work,
                "stall_horizon": self.stall_horizon,
                "stall_abort": self.stall_abort,
                "staking_fee": format_coins(self.staking_fee),
                "mempool_max": self.mempool_max,
                "trace_deliveries": self.trace_deliveries,
            },
            "params": self.params.to_dict(),
            "latency": {
                "kind": self.latency.kind.name.lower(),
                "low": self.latency.low,
                "high": self.latency.high,
            },
            "network": {
                "honest_miners": self.network.honest_miners,
                "honest_hashpower": self.network.honest_hashpower,
                "stakers": self.network.stakers,
                "tickets": self.network.tickets,
                "ticket_price": format_coins(self.network.ticket_price),
                "online": self.network.online,
                "spare_balance": format_coins(self.network.spare_balance),
            },
            "nodes": [_node_to_dict(n) for n in self.nodes],
            "attack": {
                "stake_share": self.attack.stake_share,
                "hash_multiplier": self.attack.hash_multiplier,
                "attack_height": self.attack.attack_height,
                "amount": format_coins(self.attack.amount),
                "give_up_deficit": self.attack.give_up_deficit,
                "quit_height": self.attack.quit_height,
                "pool_share": self.attack.pool_share,
                "offline_height": self.attack.offline_height,
                "greedy_fraction": self.attack.greedy_fraction,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _node_to_dict(node: NodeSpec) -> dict[str, Any]:
    return {
        "id": node.id,
        "miner": node.miner,
        "staker": node.staker,
        "stakepool": node.stakepool,
        "hashpower": node.hashpower,
        "stake": format_coins(node.stake),
        "balance": format_coins(node.balance),
        "online": node.online,
        "adversarial": node.adversarial,
        "strategy": node.strategy.name.lower(),
        "delegate": node.delegate,
    }


_SECTIONS = {"scenario", "params", "latency", "network", "nodes", "attack"}


def _section(data: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    value = data.get(name, {})
    if not isinstance(value, Mapping):
        raise ConfigError("expected a table", name)
    return value


def _take(
    table: Mapping[str, Any], prefix: str, spec: Mapping[str, Any]
) -> dict[str, Any]:
    """Convert known keys with their converters; reject unknown keys."""
    out: dict[str, Any] = {}
    for key, value in table.items():
        convert = spec.get(key)
        if convert is None:
            raise ConfigError("unknown key", f"{prefix}.{key}")
        if value is None:
            out[key] = None
            continue
        try:
            out[key] = convert(value)
        except ConfigError:
            raise
        except (TypeError, ValueError, ArithmeticError) as exc:
            raise ConfigError(f"invalid value {value!r} ({exc})", f"{prefix}.{key}") from None
    return out


def _coin_amount(value: Any) -> int:
    try:
        return coins(value)
    except ParamsError as exc:
        raise ValueError(str(exc)) from None


def _strict_bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValueError("expected true or false")
    return value


_SCENARIO_KEYS = {
    "kind": parse_kind,
    "preset": str,
    "seed": int,
    "run_blocks": int,
    "n_conf": int,
    "mode": lambda v: _enum(ConsensusMode, v, "scenario.mode"),
    "mining": lambda v: _enum(MiningMode, v, "scenario.mining"),
    "real_work": int,
    "stall_horizon": float,
    "stall_abort": float,
    "staking_fee": _coin_amount,
    "mempool_max": int,
    "trace_deliveries": _strict_bool,
}
_LATENCY_KEYS = {
    "kind": lambda v: _enum(LatencyKind, v, "latency.kind"),
    "low": float,
    "high": float,
}
_NETWORK_KEYS = {
    "honest_miners": int,
    "honest_hashpower": float,
    "stakers": int,
    "tickets": int,
    "ticket_price": _coin_amount,
    "online": float,
    "spare_balance": _coin_amount,
}
_NODE_KEYS = {
    "id": str,
    "miner": _strict_bool,
    "staker": _strict_bool,
    "stakepool": _strict_bool,
    "hashpower": float,
    "stake": _coin_amount,
    "balance": _coin_amount,
    "online": float,
    "adversarial": _strict_bool,
    "strategy": lambda v: _enum(Strategy, v, "nodes.strategy"),
    "delegate": str,
}
_ATTACK_KEYS = {
    "stake_share": float,
    "hash_multiplier": float,
    "attack_height": int,
    "amount": _coin_amount,
    "give_up_deficit": int,
    "quit_height": int,
    "pool_share": float,
    "offline_height": int,
    "greedy_fraction": float,
}


def config_from_dict(data: Mapping[str, Any]) -> ScenarioConfig:
    unknown = set(data) - _SECTIONS
    if unknown:
        raise ConfigError("unknown section", sorted(unknown)[0])

    scenario = _take(_section(data, "scenario"), "scenario", _SCENARIO_KEYS)
    preset = preset_params_name(scenario.pop("preset", "PROJECT_PAI"))
    try:
        params = preset_params(preset).with_overrides(_section(data, "params"))
    except ParamsError as exc:
        raise ConfigError(str(exc), f"params.{exc.field}" if exc.field else "params") from None

    latency = _take(_section(data, "latency"), "latency", _LATENCY_KEYS)
    if "low" in latency and "high" not in latency:
        latency["high"] = latency["low"]

    raw_nodes = data.get("nodes", [])
    if not isinstance(raw_nodes, list):
        raise ConfigError("expected an array of tables", "nodes")
    nodes = []
    for raw in raw_nodes:
        if not isinstance(raw, Mapping) or "id" not in raw:
            raise ConfigError("every node needs an id", "nodes.id")
        nodes.append(NodeSpec(**_take(raw, "nodes", _NODE_KEYS)))

    return ScenarioConfig(
        preset=preset,
        params=params,
        latency=LatencyModel(**latency),
        network=NetworkShape(**_take(_section(data, "network"), "network", _NETWORK_KEYS)),
        nodes=tuple(nodes),
        attack=AttackKnobs(**_take(_section(data, "attack"), "attack", _ATTACK_KEYS)),
        **scenario,
    )


def preset_params_name(name: str) -> str:
    try:
        preset_params(name)
    except ParamsError as exc:
        raise ConfigError(str(exc), "scenario.preset") from None
    return str(name).upper()


def load_config(path: Path) -> ScenarioConfig:
    """Load a TOML scenario file or a JSON effective-config dump."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path.name}: {exc}") from None
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path.name} must hold a table at the top level")
    return config_from_dict(data)
