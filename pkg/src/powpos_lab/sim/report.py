from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from powpos_lab.sim.events import BaseEvent

Outcome = Enum("Outcome", ["COMPLETED", "SUCCEEDED", "FAILED", "STALLED"])

BLOCK_CSV_FIELDS = [
    "height",
    "time",
    "interval",
    "votes",
    "missed",
    "participation",
    "live_tickets",
]


@dataclass(frozen=True, slots=True)
class BlockRecord:
    """One best-chain block as seen in the per-block CSV."""

    height: int
    time: float
    interval: float
    votes: int
    missed: int
    participation: float
    live_tickets: int


@dataclass(frozen=True)
class ScenarioReport:
    scenario: str
    seed: int
    outcome: Outcome
    best_height: int
    end_time: float
    blocks_found: dict[str, int]
    best_chain_blocks: dict[str, int]
    reorg_depths: dict[int, int]
    window_intervals: list[float]
    mean_interval: float
    missed_vote_rate: float
    stall_episodes: int
    metrics: dict[str, Any] = field(default_factory=dict)
    blocks: tuple[BlockRecord, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "outcome": self.outcome.name,
            "best_height": self.best_height,
            "end_time": self.end_time,
            "blocks_found": dict(self.blocks_found),
            "best_chain_blocks": dict(self.best_chain_blocks),
            "reorg_depths": {str(k): v for k, v in sorted(self.reorg_depths.items())},
            "window_intervals": list(self.window_intervals),
            "mean_interval": self.mean_interval,
            "missed_vote_rate": self.missed_vote_rate,
            "stall_episodes": self.stall_episodes,
            "metrics": dict(self.metrics),
            "participation": [[b.height, b.participation] for b in self.blocks],
        }

    def summary_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "seed": self.seed,
            "outcome": self.outcome.name,
            "best_height": self.best_height,
            "mean_interval": round(self.mean_interval, 6),
            "missed_vote_rate": round(self.missed_vote_rate, 6),
            "stall_episodes": self.stall_episodes,
            "max_reorg_depth": max(self.reorg_depths, default=0),
        }
        for key, value in sorted(self.metrics.items()):
            row[key] = round(value, 6) if isinstance(value, float) else value
        return row


def write_report(report: ScenarioReport, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")


def blocks_csv(records: Iterable[BlockRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BLOCK_CSV_FIELDS)
    for r in records:
        writer.writerow(
            [
                r.height,
                f"{r.time:.3f}",
                f"{r.interval:.3f}",
                r.votes,
                r.missed,
                f"{r.participation:.3f}",
                r.live_tickets,
            ]
        )
    return buf.getvalue()


def aggregate_csv(reports: Sequence[ScenarioReport]) -> str:
    """One row per seed; columns are the union of every report's summary keys."""
    rows = [r.summary_row() for r in sorted(reports, key=lambda r: r.seed)]
    columns: list[str] = []
    for row in rows:
        columns.extend(k for k in row if k not in columns)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", restval="")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def success_rate(reports: Sequence[ScenarioReport]) -> float:
    if not reports:
        return 0.0
    return sum(r.outcome is Outcome.SUCCEEDED for r in reports) / len(reports)


def write_trace(events: Iterable[BaseEvent], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for event in events:
            f.write(event.to_json() + "\n")
