"""Attack-cost model: buy the stake, then buy the hashpower that stake still needs."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from powpos_lab.chain.params import ParamsError
from powpos_lab.econ.majority import stake_for_hash_share

# Hash shares 95%, 90%, ..., 5%
DEFAULT_SHARES: tuple[float, ...] = tuple(round(0.95 - 0.05 * i, 2) for i in range(19))

# Column names as printed in the published cost table, plus the feasibility flag
STAKE_RATIO = "Stake Ratio (%)"
PUBLIC_SUPPLY = "Percent of Publicly Available Coin Supply (%)"
COIN_COST = "Cost of Coin Purchase ($ Million)"
MULTIPLIER = "Honest Hashrate Multiplier"
GPU_COST = "Cost of GPU Acquisition ($ Million)"
TOTAL_COST = "Total Attacking Cost ($ Million)"
FEASIBLE = "Feasible"

TABLE_FIELDS = [STAKE_RATIO, PUBLIC_SUPPLY, COIN_COST, MULTIPLIER, GPU_COST, TOTAL_COST, FEASIBLE]


@dataclass(frozen=True, slots=True)
class EconParams:
    price: float = 0.052201
    total_supply: float = 1_563_172_500
    public_supply: float = 735_000_000
    gpu_price: float = 6369.0
    gpu_count: int = 100

    def __post_init__(self) -> None:
        for name in ("price", "total_supply", "public_supply", "gpu_price", "gpu_count"):
            if getattr(self, name) <= 0:
                raise ParamsError(f"{name} must be positive", name)
        if self.public_supply > self.total_supply:
            raise ParamsError("public_supply cannot exceed total_supply", "public_supply")

    @property
    def honest_fleet_cost(self) -> float:
        return self.gpu_count * self.gpu_price


@dataclass(frozen=True, slots=True)
class CostRow:
    hash_share: float
    stake_ratio: float
    percent_public: float
    coin_cost: float
    multiplier: float
    gpu_cost: float
    total_cost: float
    feasible: bool

    def display(self) -> dict[str, str]:
        """Row as emitted in the table: percentages and millions of USD to 2 decimals."""
        return {
            STAKE_RATIO: f"{self.stake_ratio * 100:.2f}",
            PUBLIC_SUPPLY: f"{self.percent_public:.2f}",
            COIN_COST: f"{self.coin_cost / 1e6:.2f}",
            MULTIPLIER: f"{self.multiplier:.2f}",
            GPU_COST: f"{self.gpu_cost / 1e6:.2f}",
            TOTAL_COST: f"{self.total_cost / 1e6:.2f}",
            FEASIBLE: "true" if self.feasible else "false",
        }


def cost_row(econ: EconParams, p: float, m: int = 5, n: int = 3) -> CostRow:
    f_s = stake_for_hash_share(p, m, n)
    coins = f_s * econ.total_supply
    percent = coins / econ.public_supply * 100
    coin_cost = coins * econ.price
    multiplier = p / (1.0 - p)
    gpu_cost = multiplier * econ.honest_fleet_cost
    return CostRow(
        hash_share=p,
        stake_ratio=f_s,
        percent_public=percent,
        coin_cost=coin_cost,
        multiplier=multiplier,
        gpu_cost=gpu_cost,
        total_cost=coin_cost + gpu_cost,
        feasible=percent <= 100.0,
    )


def cost_table(
    econ: EconParams, m: int = 5, n: int = 3, shares: Iterable[float] = DEFAULT_SHARES
) -> list[CostRow]:
    if m < 1 or not 1 <= n <= m:
        raise ParamsError(f"require 1 <= n <= m, got m={m} n={n}", "n")
    return [cost_row(econ, p, m, n) for p in shares]


def cost_at_price(price: float, p: float, econ: EconParams, m: int = 5, n: int = 3) -> float:
    """Total attack cost with the coin component repriced; GPU cost is unchanged."""
    return cost_row(dataclasses.replace(econ, price=price), p, m, n).total_cost


def table_csv(rows: Sequence[CostRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABLE_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(row.display() for row in rows)
    return buf.getvalue()


def table_json(rows: Sequence[CostRow]) -> str:
    return json.dumps([dataclasses.asdict(row) for row in rows], indent=2) + "\n"
