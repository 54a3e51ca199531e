from __future__ import annotations

import csv
import io
from enum import Enum

import numpy as np

from powpos_lab.econ.costs import EconParams, cost_row
from powpos_lab.econ.majority import required_hash_ratio

Figure = Enum("Figure", ["FIG2", "FIG3"])

FIGURE_FIELDS = {
    Figure.FIG2: ["stake_fraction", "required_hash_ratio"],
    Figure.FIG3: ["hash_share", "hybrid_cost_usd", "pow_cost_usd"],
}


def _grid(resolution: int) -> np.ndarray:
    # Interior points of (0, 1); both curves diverge at the ends
    return np.linspace(0.0, 1.0, resolution + 2)[1:-1]


def figure_data(
    kind: Figure, econ: EconParams | None = None, resolution: int = 99, m: int = 5, n: int = 3
) -> list[list[float | None]]:
    """Sampled curve points.

    FIG2 is the hash multiple needed per stake fraction. FIG3 is the total
    attack cost per hash share for the hybrid chain and for a pure-PoW chain;
    the pure-PoW column is None where the attacker does not outmine honest miners.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    econ = econ or EconParams()
    rows: list[list[float | None]] = []
    match kind:
        case Figure.FIG2:
            for f in _grid(resolution):
                rows.append([float(f), required_hash_ratio(float(f), m, n)])
        case Figure.FIG3:
            for p in _grid(resolution):
                share = float(p)
                hybrid = cost_row(econ, share, m, n).total_cost
                pow_only = share / (1.0 - share) * econ.honest_fleet_cost if share > 0.5 else None
                rows.append([share, hybrid, pow_only])
    return rows


def figure_csv(kind: Figure, rows: list[list[float | None]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIGURE_FIELDS[kind])
    for row in rows:
        writer.writerow("" if v is None else repr(v) for v in row)
    return buf.getvalue()
