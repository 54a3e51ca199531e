from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Any

from powpos_lab.hashing import HashAlgo

COIN = 100_000_000
"""Smallest coin unit is 10^-8 coin; all amounts are integers in that unit."""

Preset = Enum("Preset", ["PROJECT_PAI", "DECRED_LIKE"])

_FRACTION_FIELDS = {
    "max_retarget_factor",
    "split_miner",
    "split_voters",
    "split_dev",
    "window_alpha",
}
_COIN_FIELDS = {"initial_block_reward", "total_supply_cap"}


class ParamsError(ValueError):
    """Raised for unknown presets and for parameter sets violating an invariant."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


def coins(value: int | float | str | Decimal) -> int:
    """Convert a coin amount to smallest units, exactly for decimal literals."""
    units = Decimal(str(value)) * COIN
    if units != units.to_integral_value():
        raise ParamsError(f"Amount {value} is finer than the smallest coin unit")
    return int(units)


def format_coins(units: int) -> str:
    return format((Decimal(units) / COIN).normalize(), "f")


@dataclass(frozen=True, slots=True)
class ChainParams:
    target_block_time: int
    retarget_interval: int
    max_retarget_factor: Fraction
    initial_block_reward: int
    reward_reduction_numerator: int
    reward_reduction_denominator: int
    reward_reduction_interval: int
    split_miner: Fraction
    split_voters: Fraction
    split_dev: Fraction
    m_voters: int
    n_quorum: int
    stake_maturity: int
    lock_after: int
    window_alpha: Fraction
    total_supply_cap: int
    hash_algo: HashAlgo

    def __post_init__(self) -> None:
        if self.split_miner + self.split_voters + self.split_dev != 1:
            raise ParamsError("Reward splits must sum to exactly 1", "split_miner")
        if not (self.m_voters / 2 < self.n_quorum <= self.m_voters):
            raise ParamsError(
                f"n_quorum={self.n_quorum} must satisfy m/2 < n <= m "
                f"(m_voters={self.m_voters})",
                "n_quorum",
            )
        if self.max_retarget_factor <= 1:
            raise ParamsError("max_retarget_factor must exceed 1", "max_retarget_factor")
        if self.retarget_interval < 1:
            raise ParamsError("retarget_interval must be >= 1", "retarget_interval")
        if self.target_block_time <= 0:
            raise ParamsError("target_block_time must be positive", "target_block_time")
        if not (
            0 < self.reward_reduction_numerator <= self.reward_reduction_denominator
        ):
            raise ParamsError(
                "reward reduction ratio must lie in (0, 1]", "reward_reduction_numerator"
            )
        if self.reward_reduction_interval < 1:
            raise ParamsError(
                "reward_reduction_interval must be >= 1", "reward_reduction_interval"
            )
        # Entries created or terminated at h change state at a later height only
        if self.stake_maturity < 1:
            raise ParamsError("stake_maturity must be >= 1", "stake_maturity")
        if self.lock_after < 1:
            raise ParamsError("lock_after must be >= 1", "lock_after")
        if self.window_alpha <= 0:
            raise ParamsError("window_alpha must be positive", "window_alpha")

    def with_overrides(self, overrides: Mapping[str, Any]) -> ChainParams:
        """Return a validated copy with fields replaced from a config mapping."""
        known = {f.name for f in dataclasses.fields(self)}
        changes: dict[str, Any] = {}
        for key, value in overrides.items():
            if key not in known:
                raise ParamsError(f"Unknown chain parameter '{key}'", key)
            changes[key] = _coerce(key, value)
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name in _COIN_FIELDS:
                out[f.name] = format_coins(value)
            elif isinstance(value, Fraction):
                out[f.name] = str(value)
            elif isinstance(value, Enum):
                out[f.name] = value.name
            else:
                out[f.name] = value
        return out


def _coerce(key: str, value: Any) -> Any:
    try:
        if key in _FRACTION_FIELDS:
            return Fraction(str(value))
        if key in _COIN_FIELDS:
            return coins(value)
        if key == "hash_algo":
            return value if isinstance(value, HashAlgo) else HashAlgo[str(value)]
        return int(value)
    except (KeyError, ValueError, ArithmeticError) as exc:
        raise ParamsError(f"Invalid value {value!r} for '{key}'", key) from exc


_PRESETS: dict[Preset, ChainParams] = {
    Preset.PROJECT_PAI: ChainParams(
        target_block_time=600,
        retarget_interval=2016,
        max_retarget_factor=Fraction(4),
        initial_block_reward=1500 * COIN,
        reward_reduction_numerator=50,
        reward_reduction_denominator=100,
        reward_reduction_interval=210_000,
        split_miner=Fraction(60, 100),
        split_voters=Fraction(30, 100),
        split_dev=Fraction(10, 100),
        m_voters=5,
        n_quorum=3,
        stake_maturity=256,
        lock_after=256,
        window_alpha=Fraction(8),
        total_supply_cap=2_100_000_000 * COIN,
        hash_algo=HashAlgo.DOUBLE_SHA256,
    ),
    Preset.DECRED_LIKE: ChainParams(
        target_block_time=300,
        retarget_interval=144,
        max_retarget_factor=Fraction(4),
        initial_block_reward=coins("31.19582664"),
        reward_reduction_numerator=100,
        reward_reduction_denominator=101,
        reward_reduction_interval=6144,
        split_miner=Fraction(60, 100),
        split_voters=Fraction(30, 100),
        split_dev=Fraction(10, 100),
        m_voters=5,
        n_quorum=3,
        stake_maturity=256,
        lock_after=256,
        window_alpha=Fraction(8),
        total_supply_cap=21_000_000 * COIN,
        # BLAKE-256 is not among the offered backends
        hash_algo=HashAlgo.SHA3_256,
    ),
}


def preset_params(name: Preset | str) -> ChainParams:
    """Return the full parameter column of a named preset."""
    try:
        preset = name if isinstance(name, Preset) else Preset[str(name).upper()]
    except KeyError:
        raise ParamsError(
            f"Unknown preset '{name}'; expected one of "
            f"{', '.join(p.name for p in Preset)}",
            "preset",
        ) from None
    return _PRESETS[preset]


@lru_cache(maxsize=1024)
def _reduced_reward(initial: int, numerator: int, denominator: int, steps: int) -> int:
    if numerator == denominator or steps == 0:
        return initial
    return initial * numerator**steps // denominator**steps


def block_reward_at(height: int, params: ChainParams, minted: int = 0) -> int:
    """Subsidy of the block at `height`, clipped so `minted` never passes the cap."""
    if height < 0:
        raise ValueError("height must be >= 0")
    reward = _reduced_reward(
        params.initial_block_reward,
        params.reward_reduction_numerator,
        params.reward_reduction_denominator,
        height // params.reward_reduction_interval,
    )
    return max(0, min(reward, params.total_supply_cap - minted))
